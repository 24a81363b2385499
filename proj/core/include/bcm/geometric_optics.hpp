#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "bcm/source_to_solution.hpp"

namespace bcm {

/// C-infinity step: 0 for z <= 0, 1 for z >= 1, with closed-form derivatives.
struct SmoothStep {
  double value = 0, d1 = 0, d2 = 0;
  static SmoothStep at(double z);
};

struct BumpJet {
  double value = 0;
  Point grad;
  double hxx = 0, hxy = 0, hyy = 0;
  double laplacian = 0;
};

/// Radial bump: 1 on |x - c| <= plateau, 0 beyond plateau + transition.
struct PlateauBump {
  Point center;
  double plateau = 0;
  double transition = 1;
  int dim = 1;

  double value(Point x) const;
  BumpJet jet(Point x) const;
};

struct ProbeParams {
  Point x0;
  double sigma = 0;  // 0 gives a real, non-oscillating probe (order 0 only)
  int order = 0;     // N
  double delta = 0;  // <= 0 picks half the largest inner normal ball radius at y
  double eta = 0;
};

/// Order-N geometric optics probe travelling from omega to x0 along the
/// inward ray beta(t) = x0 - (s + delta - t) nu.
class GOProbe {
 public:
  GOProbe(const SourceToSolutionMap& map, const ProbeParams& p);

  const ProbeParams& params() const { return p_; }
  Point x0() const { return p_.x0; }
  Point boundary_point() const { return y_; }
  Point normal() const { return nu_; }
  double s() const { return s_; }
  double delta() const { return p_.delta; }
  double eta() const { return p_.eta; }
  double s_delta() const { return s_ + p_.delta; }
  double sigma() const { return p_.sigma; }
  int order() const { return p_.order; }
  Point beta(double t) const;
  /// Phase t - x . nu
  double phase(double t, Point x) const;

  const PlateauBump& chi() const { return chi_; }             // centred at the origin
  const PlateauBump& outer_cutoff() const { return outer_; }  // chi tilde
  double time_cutoff(double t) const;                          // psi

  /// Points per wavelength 2 pi / (sigma h); infinite for sigma = 0.
  double points_per_wavelength() const;

  const SpatialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const TimeGrid& time() const { return time_; }
  const RegionPtr& omega() const { return omega_; }
  const Potential& potential() const { return *q_; }
  /// Node box {imin, imax, jmin, jmax} swept by the amplitudes over (0, T).
  const std::array<int, 4>& tube() const { return tube_; }

 private:
  ProbeParams p_;
  GridPtr grid_;
  TimeGrid time_;
  RegionPtr omega_;
  PotentialPtr q_;
  Point y_, nu_;
  double s_ = 0;
  PlateauBump chi_;
  PlateauBump outer_;
  std::array<int, 4> tube_{};
};

/// Step-by-step evaluation of the amplitudes a_0..a_N and of
/// V = A_N e^{i sigma phi} on the grid. a_0 and a_1 are closed form (a_1
/// accumulates the potential along characteristics); a_l for l >= 2 come
/// from a recursion on a lattice moving with the ray, precomputed up to
/// last_step.
class AnsatzStream {
 public:
  AnsatzStream(const GOProbe& probe, int last_step);
  ~AnsatzStream();
  AnsatzStream(const AnsatzStream&) = delete;
  AnsatzStream& operator=(const AnsatzStream&) = delete;

  /// Step of the values currently held; -1 before the first advance().
  int step() const { return step_; }
  /// Moves to the next step and returns V there (full grid).
  std::span<const Complex> advance();
  std::span<const Complex> field() const { return v_; }
  /// a_l at the current step (full grid, zero away from the ray).
  std::span<const Complex> amplitude(int l) const;

 private:
  struct Lattice;

  const GOProbe& probe_;
  int last_;
  int step_ = -1;
  std::vector<Complex> v_;
  std::vector<std::vector<Complex>> amp_;
  std::vector<double> q_acc_;  // Q(t, x) over the tube box
  std::array<int, 4> active_{0, -1, 0, -1};
  std::unique_ptr<Lattice> lattice_;
};

/// Calls fn(k, V^k) for k = 0..last_step.
void sweep_ansatz(const GOProbe& probe, int last_step, const std::function<void(int, std::span<const Complex>)>& fn);

/// Discrete residual ||(box_d + q) V||_{L2((1, last_step - 1) x R^n)} of
/// the ansatz itself, with the solver's stencil.
double ansatz_residual(const GOProbe& probe, int last_step);

/// h = -box_d (chi~ A_N e^{i sigma phi}) with the discrete d'Alembertian of
/// the solver, as data on omega. Fails if the source leaks onto the boundary
/// layer of omega.
BoundaryData build_source(const GOProbe& probe);

/// Space-time H^2 norm of the source over (0,T) x omega by finite differences.
double source_h2_norm(const BoundaryData& h);

struct RemainderRow {
  double sigma = 0;
  double l2_remainder = 0;
  double h2_source_norm = 0;
  bool ppw_flag = false;  // true when below 10 points per wavelength
};

struct DecayReport {
  std::vector<RemainderRow> rows;
  double slope = 0;  // least squares slope of log remainder against log sigma
  int fitted = 0;
  double h2_slope = 0;
};

/// L2((0, s_delta + 2 eta) x R^n) norm of u^h - (1 - chi~) A_N e^{i sigma phi}.
double remainder_norm(const SourceToSolutionMap& map, const GOProbe& probe);

DecayReport remainder_check(const SourceToSolutionMap& map, ProbeParams p, const std::vector<double>& sigmas);

void write_decay_csv(std::ostream& os, const DecayReport& r);

/// u^h(t_step, .) for the probe source.
ScalarField probe_field(const SourceToSolutionMap& map, const GOProbe& probe, int step);

struct LowerBound {
  double sigma0 = 0;
  double margin = 0;
  bool achieved = false;
  std::vector<std::pair<double, double>> values;  // (sigma, |u^h(s_delta, x0)|)
};

/// Smallest scheduled sigma with |u^h(s_delta, x0)| >= 1/2.
LowerBound probe_lower_bound(const SourceToSolutionMap& map, ProbeParams p, const std::vector<double>& sigmas);

}  // namespace bcm
