#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace bcm {

using Complex = std::complex<double>;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point, Point) = default;
};

double dot(Point a, Point b);
double norm(Point a);

/// Uniform node lattice on an axis-aligned box in one or two dimensions.
class SpatialGrid {
 public:
  SpatialGrid(int dim, Point lower, double h, std::array<int, 2> counts);

  /// Smallest grid with spacing h whose box contains [lower, upper]. The
  /// lower corner is snapped down to a multiple of h so that geometry given
  /// in multiples of h lands on nodes.
  static SpatialGrid covering(int dim, Point lower, Point upper, double h);

  int dim() const { return dim_; }
  double spacing() const { return h_; }
  int count(int axis) const { return counts_[axis]; }
  double lower(int axis) const { return axis == 0 ? lower_.x : lower_.y; }
  double upper(int axis) const { return lower(axis) + (counts_[axis] - 1) * h_; }
  std::size_t size() const { return static_cast<std::size_t>(counts_[0]) * counts_[1]; }
  double cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }

  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(j) * counts_[0] + static_cast<std::size_t>(i);
  }
  std::array<int, 2> coords(std::size_t idx) const {
    return {static_cast<int>(idx % counts_[0]), static_cast<int>(idx / counts_[0])};
  }
  Point position(std::size_t idx) const;
  std::size_t nearest_node(Point p) const;

  friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;

 private:
  int dim_;
  Point lower_;
  double h_;
  std::array<int, 2> counts_;
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

/// Uniform time stepping of (0, T) with nt steps.
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  /// Step count chosen so that dt <= cfl * h / sqrt(dim), rounded up to even.
  static TimeGrid from_cfl(double horizon, double h, int dim, double cfl);

  double horizon() const { return horizon_; }
  double dt() const { return horizon_ / steps_; }
  int steps() const { return steps_; }
  double time(int k) const { return k * dt(); }

  /// Step index of a time on the grid; throws if t is off-grid.
  int step_of(double t) const;
  double courant(double h, int dim) const;
  void check_cfl(double h, int dim) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_;
  int steps_;
};

enum class RegionKind { omega, target_k, influence, cap, ball, generic };

/// Node mask over a grid, with trapezoid quadrature weights per member node.
class Region {
 public:
  Region(GridPtr grid, std::vector<std::uint8_t> mask, RegionKind kind);

  static Region box(GridPtr grid, Point lo, Point hi, RegionKind kind);
  static Region ball(GridPtr grid, Point center, double radius, RegionKind kind);
  static Region whole(GridPtr grid);

  const SpatialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  RegionKind kind() const { return kind_; }

  bool contains(std::size_t node) const { return mask_[node] != 0; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::span<const std::size_t> nodes() const { return nodes_; }
  /// Dimensionless trapezoid weights aligned with nodes(); multiply by h^n.
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  /// Position of a node within nodes(), or npos.
  std::size_t local_index(std::size_t node) const;
  /// Node count times h^n.
  double volume() const;

  bool subset_of(const Region& other) const;
  /// Member nodes with at least one axis neighbour outside the region.
  std::vector<std::size_t> boundary_nodes() const;
  /// Inclusive index ranges {imin, imax, jmin, jmax}.
  std::array<int, 4> bounding_box() const;

  Region with_kind(RegionKind kind) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  GridPtr grid_;
  std::vector<std::uint8_t> mask_;
  RegionKind kind_;
  std::vector<std::size_t> nodes_;
  std::vector<double> weights_;
  std::vector<std::size_t> local_;  // node -> position in nodes_
};

using RegionPtr = std::shared_ptr<const Region>;

Region set_difference(const Region& a, const Region& b, RegionKind kind);
Region set_intersection(const Region& a, const Region& b, RegionKind kind);

/// Complex nodal values on a grid.
class ScalarField {
 public:
  explicit ScalarField(GridPtr grid);
  ScalarField(GridPtr grid, std::vector<Complex> values);

  static ScalarField sample(GridPtr grid, const std::function<Complex(Point)>& fn);

  const SpatialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<Complex> values() { return values_; }
  std::span<const Complex> values() const { return values_; }
  Complex& operator[](std::size_t i) { return values_[i]; }
  const Complex& operator[](std::size_t i) const { return values_[i]; }

  /// Copy with values outside r set to zero.
  ScalarField restricted(const Region& r) const;

 private:
  GridPtr grid_;
  std::vector<Complex> values_;
};

/// Space-time data on (0,T) x omega: one row of omega-node values per step.
class BoundaryData {
 public:
  BoundaryData(RegionPtr omega, TimeGrid time);

  static BoundaryData sample(RegionPtr omega, TimeGrid time,
                             const std::function<Complex(double, Point)>& fn);

  const Region& region() const { return *region_; }
  const RegionPtr& region_ptr() const { return region_; }
  const TimeGrid& time() const { return time_; }
  int steps() const { return time_.steps(); }
  std::size_t nodes() const { return region_->size(); }

  Complex& at(int k, std::size_t j) { return values_[static_cast<std::size_t>(k) * nodes() + j]; }
  Complex at(int k, std::size_t j) const { return values_[static_cast<std::size_t>(k) * nodes() + j]; }
  std::span<Complex> row(int k) { return {values_.data() + static_cast<std::size_t>(k) * nodes(), nodes()}; }
  std::span<const Complex> row(int k) const {
    return {values_.data() + static_cast<std::size_t>(k) * nodes(), nodes()};
  }
  std::span<Complex> values() { return values_; }
  std::span<const Complex> values() const { return values_; }

  int window_begin() const { return window_[0]; }
  int window_end() const { return window_[1]; }
  /// Declare the inclusive step window [k0, k1]; values outside are zeroed.
  void set_window(int k0, int k1);
  /// Zero the values at nodes outside r (r must live on the same grid).
  void restrict_nodes(const Region& r);

  bool is_real() const;
  bool is_zero() const;
  bool compatible(const BoundaryData& other) const;

  BoundaryData& operator+=(const BoundaryData& o);
  BoundaryData& operator-=(const BoundaryData& o);
  BoundaryData& operator*=(Complex s);
  /// this += s * o
  void axpy(Complex s, const BoundaryData& o);

 private:
  RegionPtr region_;
  TimeGrid time_;
  std::array<int, 2> window_;
  std::vector<Complex> values_;
};

BoundaryData operator+(BoundaryData a, const BoundaryData& b);
BoundaryData operator-(BoundaryData a, const BoundaryData& b);
BoundaryData operator*(Complex s, BoundaryData a);

/// Trapezoid weight of step k on the inclusive window [k0, k1].
double trapezoid_weight(int k, int k0, int k1);

/// Sum over r of w_i a_i conj(b_i) h^n.
Complex l2_inner(const ScalarField& a, const ScalarField& b, const Region& r);
double l2_norm(const ScalarField& a, const Region& r);
/// sqrt(||a||^2 + ||grad a||^2) over r, gradient by centred differences.
double h1_norm(const ScalarField& a, const Region& r);

/// Space-time trapezoid pairing over the inclusive step window [k0, k1].
Complex boundary_inner(const BoundaryData& f, const BoundaryData& g, int k0, int k1);
/// Same with the window given in time units; endpoints must be grid times.
Complex boundary_inner_t(const BoundaryData& f, const BoundaryData& g, double t0, double t1);
/// Pairing over the whole horizon (0, T).
Complex data_inner(const BoundaryData& f, const BoundaryData& g);
double data_norm(const BoundaryData& f);

/// Euclidean distance from every node to the nearest node of r.
std::vector<double> distance_field(const Region& r);
/// Nodes with distance to omega at most s + h/2.
Region influence_region(const Region& omega, double s);
/// sup over K of dist(x, omega).
double max_distance(const Region& k, const Region& omega);

/// Nearest boundary node y of omega to x0 with the outward unit normal there
/// (normalised centred gradient of the distance field) and dist(x0, omega).
struct BoundaryFrame {
  std::size_t node = 0;
  Point y;
  Point normal;
  double distance = 0;
};
BoundaryFrame boundary_frame(Point x0, const Region& omega);

}  // namespace bcm
