#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcm/grid.hpp"

namespace bcm {

struct GaussianBump {
  Point center;
  double width = 1.0;  // standard deviation
  double amplitude = 0.0;
};

/// Real potential q on the grid nodes, with optional C^m bound metadata.
class Potential {
 public:
  explicit Potential(GridPtr grid);
  Potential(GridPtr grid, std::vector<double> values);

  /// Sum of amplitude * exp(-|x-c|^2 / (2 width^2)).
  static Potential from_bumps(GridPtr grid, std::span<const GaussianBump> bumps);

  const SpatialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t n) const { return values_[n]; }
  double sup_norm() const;
  bool is_zero() const;

  /// Records the C^m bound M; rejects it when the sup norm already exceeds M.
  void set_bound(double M, int m);
  std::optional<double> bound() const { return bound_; }
  int smoothness() const { return order_; }

  /// Linear (1D) or bilinear (2D) interpolation; zero outside the box.
  double interpolate(Point p) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
  std::optional<double> bound_;
  int order_ = 0;
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// Snapshots u(t_k, .) for a sorted set of stored steps.
class SpaceTimeField {
 public:
  SpaceTimeField(GridPtr grid, TimeGrid time, std::vector<int> steps);

  const SpatialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const TimeGrid& time() const { return time_; }
  std::span<const int> steps() const { return steps_; }
  bool has(int step) const;
  const ScalarField& at(int step) const;
  ScalarField& at(int step);

 private:
  std::size_t slot(int step) const;

  GridPtr grid_;
  TimeGrid time_;
  std::vector<int> steps_;
  std::vector<ScalarField> snaps_;
};

/// Dense space-time source evaluated step by step.
struct FieldSource {
  /// Writes f(t_k, .) into out (full grid, zero-initialised by the caller).
  std::function<void(int, std::span<Complex>)> eval;
  bool real = true;
  /// Inclusive node index box {imin, imax, jmin, jmax} containing the support.
  std::array<int, 4> support{0, 0, 0, 0};
};

enum class Storage { none, selected, all };

struct SolveOptions {
  int horizon = -1;  // last computed step; -1 means nt
  Storage storage = Storage::none;
  std::vector<int> stored_steps;
  RegionPtr observe;  // record u on these nodes at every step
  std::function<void(int, std::span<const Complex>)> on_step;
};

struct SolveResult {
  SpaceTimeField field;
  std::optional<BoundaryData> trace;
};

/// Leapfrog solver for (d_t^2 - Laplacian + q) u = f with zero Cauchy data.
class WaveSolver {
 public:
  WaveSolver(PotentialPtr q, TimeGrid time);

  const Potential& potential() const { return *q_; }
  const PotentialPtr& potential_ptr() const { return q_; }
  const SpatialGrid& grid() const { return q_->grid(); }
  const TimeGrid& time() const { return time_; }

  SolveResult solve(const BoundaryData& f, const SolveOptions& opt = {}) const;
  SolveResult solve(const FieldSource& f, const SolveOptions& opt = {}) const;

 private:
  PotentialPtr q_;
  TimeGrid time_;
};

/// Full snapshot history of a boundary-source solve.
SpaceTimeField solve_forward(const PotentialPtr& q, const BoundaryData& f);

/// Leapfrog energy between steps k and k+1 (exactly conserved without sources).
double energy(const SpaceTimeField& u, const Potential& q, int step);

struct Box {
  Point lo;
  Point hi;
};

/// Box hull(K, omega) dilated by nt*h + 4h on every side.
SpatialGrid padded_box(int dim, const Box& k, const Box& omega, const TimeGrid& time, double h);
/// Same, with the step count derived from the CFL number.
SpatialGrid padded_box(int dim, const Box& k, const Box& omega, double horizon, double cfl, double h);

struct OracleQuadrature {
  double t0 = 0.0, t1 = 0.0;  // time support of f
  double x0 = 0.0, x1 = 0.0;  // space support of f
  int panels_time = 24;
  int panels_space = 12;
};

/// u(t, x) = 1/2 int_0^t int_{|y-x|<t-tau} f(tau, y) dy dtau by Gauss-Legendre quadrature.
ScalarField dalembert_oracle_1d(const std::function<double(double, double)>& f, const GridPtr& grid,
                                double t, const OracleQuadrature& quad);

/// Binary dump: int32 n, int32 counts[2], float64 h, float64 dt, then
/// (re, im) float64 pairs per node in row-major order, little-endian.
void write_snapshot(const std::string& path, const ScalarField& u, double dt);
ScalarField read_snapshot(const std::string& path, double* dt = nullptr);

}  // namespace bcm
