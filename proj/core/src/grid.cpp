#include "bcm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bcm/error.hpp"

namespace bcm {

double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double norm(Point a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------- SpatialGrid

SpatialGrid::SpatialGrid(int dim, Point lower, double h, std::array<int, 2> counts)
    : dim_(dim), lower_(lower), h_(h), counts_(counts) {
  require(dim == 1 || dim == 2, "grid dimension must be 1 or 2");
  require(h > 0.0 && std::isfinite(h), "grid spacing must be positive");
  if (dim == 1) {
    counts_[1] = 1;
    lower_.y = 0.0;
  }
  for (int a = 0; a < dim; ++a) require(counts_[a] >= 3, "grid needs at least 3 nodes per axis");
}

SpatialGrid SpatialGrid::covering(int dim, Point lower, Point upper, double h) {
  auto axis = [h](double lo, double hi, double& start) {
    start = std::floor(lo / h + 1e-9) * h;
    return static_cast<int>(std::ceil((hi - start) / h - 1e-9)) + 1;
  };
  Point start;
  std::array<int, 2> counts{1, 1};
  counts[0] = axis(lower.x, upper.x, start.x);
  if (dim == 2) counts[1] = axis(lower.y, upper.y, start.y);
  return SpatialGrid(dim, start, h, counts);
}

Point SpatialGrid::position(std::size_t idx) const {
  auto [i, j] = coords(idx);
  return {lower_.x + i * h_, dim_ == 2 ? lower_.y + j * h_ : 0.0};
}

std::size_t SpatialGrid::nearest_node(Point p) const {
  auto clamp_axis = [this](double v, int axis) {
    int i = static_cast<int>(std::lround((v - lower(axis)) / h_));
    return std::clamp(i, 0, counts_[axis] - 1);
  };
  int i = clamp_axis(p.x, 0);
  int j = dim_ == 2 ? clamp_axis(p.y, 1) : 0;
  return index(i, j);
}

// ------------------------------------------------------------------- TimeGrid

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  require(horizon > 0.0 && std::isfinite(horizon), "time horizon must be positive");
  require(steps >= 2, "time grid needs at least 2 steps");
}

TimeGrid TimeGrid::from_cfl(double horizon, double h, int dim, double cfl) {
  require(cfl > 0.0 && cfl <= 1.0, "CFL number must lie in (0, 1]");
  double dt_max = cfl * h / std::sqrt(static_cast<double>(dim));
  int steps = static_cast<int>(std::ceil(horizon / dt_max - 1e-9));
  if (steps % 2 != 0) ++steps;
  return TimeGrid(horizon, steps);
}

int TimeGrid::step_of(double t) const {
  double x = t / dt();
  long k = std::lround(x);
  if (std::abs(x - static_cast<double>(k)) > 1e-6 || k < 0 || k > steps_) {
    std::ostringstream os;
    os << "time " << t << " is not on the time grid (dt = " << dt() << ")";
    fail_validation(os.str());
  }
  return static_cast<int>(k);
}

double TimeGrid::courant(double h, int dim) const {
  return dt() * std::sqrt(static_cast<double>(dim)) / h;
}

void TimeGrid::check_cfl(double h, int dim) const {
  if (courant(h, dim) > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "CFL violation: dt = " << dt() << " exceeds h/sqrt(n) = " << h / std::sqrt(double(dim));
    fail_validation(os.str());
  }
}

// --------------------------------------------------------------------- Region

Region::Region(GridPtr grid, std::vector<std::uint8_t> mask, RegionKind kind)
    : grid_(std::move(grid)), mask_(std::move(mask)), kind_(kind) {
  require(grid_ != nullptr, "region needs a grid");
  require(mask_.size() == grid_->size(), "region mask size does not match grid");
  const auto& g = *grid_;
  local_.assign(mask_.size(), npos);
  for (std::size_t n = 0; n < mask_.size(); ++n) {
    if (!mask_[n]) continue;
    local_[n] = nodes_.size();
    nodes_.push_back(n);
  }
  if (kind_ == RegionKind::omega || kind_ == RegionKind::target_k)
    require(!nodes_.empty(), "omega and K regions must be nonempty");

  weights_.reserve(nodes_.size());
  for (std::size_t n : nodes_) {
    auto [i, j] = g.coords(n);
    double w = 1.0;
    for (int a = 0; a < g.dim(); ++a) {
      int c = a == 0 ? i : j;
      auto member = [&](int d) {
        int cc = c + d;
        if (cc < 0 || cc >= g.count(a)) return false;
        return a == 0 ? contains(g.index(cc, j)) : contains(g.index(i, cc));
      };
      bool lo = member(-1), hi = member(+1);
      if (lo != hi) w *= 0.5;
    }
    weights_.push_back(w);
  }
}

Region Region::box(GridPtr grid, Point lo, Point hi, RegionKind kind) {
  const double tol = 1e-9 * grid->spacing();
  std::vector<std::uint8_t> mask(grid->size(), 0);
  for (std::size_t n = 0; n < grid->size(); ++n) {
    Point p = grid->position(n);
    bool in = p.x >= lo.x - tol && p.x <= hi.x + tol;
    if (grid->dim() == 2) in = in && p.y >= lo.y - tol && p.y <= hi.y + tol;
    mask[n] = in;
  }
  return Region(std::move(grid), std::move(mask), kind);
}

Region Region::ball(GridPtr grid, Point center, double radius, RegionKind kind) {
  const double tol = 1e-9 * grid->spacing();
  std::vector<std::uint8_t> mask(grid->size(), 0);
  for (std::size_t n = 0; n < grid->size(); ++n)
    mask[n] = norm(grid->position(n) - center) <= radius + tol;
  return Region(std::move(grid), std::move(mask), kind);
}

Region Region::whole(GridPtr grid) {
  std::vector<std::uint8_t> mask(grid->size(), 1);
  return Region(std::move(grid), std::move(mask), RegionKind::generic);
}

std::size_t Region::local_index(std::size_t node) const { return local_[node]; }

double Region::volume() const { return static_cast<double>(nodes_.size()) * grid_->cell_volume(); }

bool Region::subset_of(const Region& other) const {
  if (!(*grid_ == other.grid())) return false;
  for (std::size_t n : nodes_)
    if (!other.contains(n)) return false;
  return true;
}

std::vector<std::size_t> Region::boundary_nodes() const {
  const auto& g = *grid_;
  std::vector<std::size_t> out;
  for (std::size_t n : nodes_) {
    auto [i, j] = g.coords(n);
    bool edge = false;
    for (int a = 0; a < g.dim() && !edge; ++a) {
      for (int d : {-1, 1}) {
        int ii = a == 0 ? i + d : i;
        int jj = a == 1 ? j + d : j;
        if (ii < 0 || ii >= g.count(0) || jj < 0 || jj >= g.count(1) || !contains(g.index(ii, jj))) {
          edge = true;
          break;
        }
      }
    }
    if (edge) out.push_back(n);
  }
  return out;
}

std::array<int, 4> Region::bounding_box() const {
  std::array<int, 4> bb{std::numeric_limits<int>::max(), -1, std::numeric_limits<int>::max(), -1};
  for (std::size_t n : nodes_) {
    auto [i, j] = grid_->coords(n);
    bb[0] = std::min(bb[0], i);
    bb[1] = std::max(bb[1], i);
    bb[2] = std::min(bb[2], j);
    bb[3] = std::max(bb[3], j);
  }
  return bb;
}

Region Region::with_kind(RegionKind kind) const { return Region(grid_, mask_, kind); }

Region set_difference(const Region& a, const Region& b, RegionKind kind) {
  require(a.grid() == b.grid(), "region grid mismatch");
  std::vector<std::uint8_t> mask(a.mask());
  for (std::size_t n = 0; n < mask.size(); ++n) mask[n] = a.contains(n) && !b.contains(n);
  return Region(a.grid_ptr(), std::move(mask), kind);
}

Region set_intersection(const Region& a, const Region& b, RegionKind kind) {
  require(a.grid() == b.grid(), "region grid mismatch");
  std::vector<std::uint8_t> mask(a.mask());
  for (std::size_t n = 0; n < mask.size(); ++n) mask[n] = a.contains(n) && b.contains(n);
  return Region(a.grid_ptr(), std::move(mask), kind);
}

// ---------------------------------------------------------------- ScalarField

ScalarField::ScalarField(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size()) {}

ScalarField::ScalarField(GridPtr grid, std::vector<Complex> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require(values_.size() == grid_->size(), "field size does not match grid");
}

ScalarField ScalarField::sample(GridPtr grid, const std::function<Complex(Point)>& fn) {
  ScalarField out(grid);
  for (std::size_t n = 0; n < grid->size(); ++n) out[n] = fn(grid->position(n));
  return out;
}

ScalarField ScalarField::restricted(const Region& r) const {
  require(r.grid() == *grid_, "region grid mismatch");
  ScalarField out(grid_);
  for (std::size_t n : r.nodes()) out[n] = values_[n];
  return out;
}

// --------------------------------------------------------------- BoundaryData

BoundaryData::BoundaryData(RegionPtr omega, TimeGrid time)
    : region_(std::move(omega)), time_(time), window_{0, time.steps()} {
  require(region_ != nullptr && !region_->empty(), "boundary data needs a nonempty region");
  values_.assign(static_cast<std::size_t>(time_.steps() + 1) * region_->size(), Complex{});
}

BoundaryData BoundaryData::sample(RegionPtr omega, TimeGrid time,
                                  const std::function<Complex(double, Point)>& fn) {
  BoundaryData out(std::move(omega), time);
  const auto& g = out.region().grid();
  for (int k = 0; k <= out.steps(); ++k) {
    auto row = out.row(k);
    double t = time.time(k);
    for (std::size_t j = 0; j < out.nodes(); ++j) row[j] = fn(t, g.position(out.region().nodes()[j]));
  }
  return out;
}

void BoundaryData::set_window(int k0, int k1) {
  require(0 <= k0 && k0 <= k1 && k1 <= steps(), "time window outside (0, T)");
  window_ = {k0, k1};
  for (int k = 0; k <= steps(); ++k)
    if (k < k0 || k > k1) std::fill(row(k).begin(), row(k).end(), Complex{});
}

void BoundaryData::restrict_nodes(const Region& r) {
  require(r.grid() == region_->grid(), "region grid mismatch");
  auto nodes = region_->nodes();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (r.contains(nodes[j])) continue;
    for (int k = 0; k <= steps(); ++k) at(k, j) = Complex{};
  }
}

bool BoundaryData::is_real() const {
  return std::all_of(values_.begin(), values_.end(), [](Complex z) { return z.imag() == 0.0; });
}

bool BoundaryData::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](Complex z) { return z == Complex{}; });
}

bool BoundaryData::compatible(const BoundaryData& other) const {
  if (!(time_ == other.time_)) return false;
  if (region_ == other.region_) return true;
  return region_->grid() == other.region().grid() && region_->mask() == other.region().mask();
}

BoundaryData& BoundaryData::operator+=(const BoundaryData& o) {
  axpy(1.0, o);
  return *this;
}

BoundaryData& BoundaryData::operator-=(const BoundaryData& o) {
  axpy(-1.0, o);
  return *this;
}

BoundaryData& BoundaryData::operator*=(Complex s) {
  if (s.imag() == 0.0) {
    const double r = s.real();
    for (auto& v : values_) v = {r * v.real(), r * v.imag()};
  } else {
    for (auto& v : values_) v *= s;
  }
  return *this;
}

void BoundaryData::axpy(Complex s, const BoundaryData& o) {
  require(compatible(o), "boundary data on different regions or time grids");
  if (s.imag() == 0.0) {
    const double r = s.real();
    double* y = reinterpret_cast<double*>(values_.data());
    const double* x = reinterpret_cast<const double*>(o.values_.data());
    for (std::size_t i = 0; i < 2 * values_.size(); ++i) y[i] += r * x[i];
  } else {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
  }
  window_ = {std::min(window_[0], o.window_[0]), std::max(window_[1], o.window_[1])};
}

BoundaryData operator+(BoundaryData a, const BoundaryData& b) { return a += b; }
BoundaryData operator-(BoundaryData a, const BoundaryData& b) { return a -= b; }
BoundaryData operator*(Complex s, BoundaryData a) { return a *= s; }

// ---------------------------------------------------------------- quadrature

double trapezoid_weight(int k, int k0, int k1) {
  if (k < k0 || k > k1) return 0.0;
  if (k0 == k1) return 0.0;
  return (k == k0 || k == k1) ? 0.5 : 1.0;
}

Complex l2_inner(const ScalarField& a, const ScalarField& b, const Region& r) {
  require(a.grid() == b.grid() && a.grid() == r.grid(), "l2_inner: grid mismatch");
  Complex s{};
  auto nodes = r.nodes();
  auto w = r.weights();
  for (std::size_t j = 0; j < nodes.size(); ++j) s += w[j] * a[nodes[j]] * std::conj(b[nodes[j]]);
  return s * r.grid().cell_volume();
}

double l2_norm(const ScalarField& a, const Region& r) { return std::sqrt(std::abs(l2_inner(a, a, r).real())); }

double h1_norm(const ScalarField& a, const Region& r) {
  const auto& g = a.grid();
  require(g == r.grid(), "h1_norm: grid mismatch");
  auto bb = r.bounding_box();
  require(!r.empty() && bb[1] - bb[0] >= 2 && (g.dim() == 1 || bb[3] - bb[2] >= 2),
          "h1_norm: region must be at least 3 nodes wide per axis");
  const double h = g.spacing();
  double grad2 = 0.0;
  auto nodes = r.nodes();
  auto w = r.weights();
  for (std::size_t jn = 0; jn < nodes.size(); ++jn) {
    auto [i, j] = g.coords(nodes[jn]);
    double sq = 0.0;
    for (int ax = 0; ax < g.dim(); ++ax) {
      int c = ax == 0 ? i : j;
      auto val = [&](int cc) { return ax == 0 ? a[g.index(cc, j)] : a[g.index(i, cc)]; };
      Complex d;
      if (c == 0) d = (val(1) - val(0)) / h;
      else if (c == g.count(ax) - 1) d = (val(c) - val(c - 1)) / h;
      else d = (val(c + 1) - val(c - 1)) / (2.0 * h);
      sq += std::norm(d);
    }
    grad2 += w[jn] * sq;
  }
  double l2 = l2_inner(a, a, r).real();
  return std::sqrt(l2 + grad2 * g.cell_volume());
}

Complex boundary_inner(const BoundaryData& f, const BoundaryData& g, int k0, int k1) {
  require(f.compatible(g), "boundary_inner: different regions or time grids");
  require(0 <= k0 && k0 <= k1 && k1 <= f.steps(), "boundary_inner: window outside (0, T)");
  auto w = f.region().weights();
  Complex s{};
  for (int k = k0; k <= k1; ++k) {
    double tw = trapezoid_weight(k, k0, k1);
    if (tw == 0.0) continue;
    auto a = f.row(k);
    auto b = g.row(k);
    Complex r{};
    for (std::size_t j = 0; j < a.size(); ++j) r += w[j] * a[j] * std::conj(b[j]);
    s += tw * r;
  }
  return s * f.time().dt() * f.region().grid().cell_volume();
}

Complex boundary_inner_t(const BoundaryData& f, const BoundaryData& g, double t0, double t1) {
  return boundary_inner(f, g, f.time().step_of(t0), f.time().step_of(t1));
}

Complex data_inner(const BoundaryData& f, const BoundaryData& g) {
  return boundary_inner(f, g, 0, f.steps());
}

double data_norm(const BoundaryData& f) { return std::sqrt(std::abs(data_inner(f, f).real())); }

// ------------------------------------------------------------------ distances

namespace {

// Exact 1D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    while (true) {
      int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k]) --k;  // z[0] = -inf stops the loop
      else break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  d.assign(n, inf);
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

std::vector<double> distance_field(const Region& r) {
  require(!r.empty(), "distance_field: empty region");
  const auto& g = r.grid();
  const int nx = g.count(0), ny = g.count(1);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> sq(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) sq[n] = r.contains(n) ? 0.0 : inf;

  std::vector<double> line, out;
  if (g.dim() == 2) {
    line.resize(ny);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) line[j] = sq[g.index(i, j)];
      edt_1d(line, out);
      for (int j = 0; j < ny; ++j) sq[g.index(i, j)] = out[j];
    }
  }
  line.resize(nx);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) line[i] = sq[g.index(i, j)];
    edt_1d(line, out);
    for (int i = 0; i < nx; ++i) sq[g.index(i, j)] = out[i];
  }
  for (auto& v : sq) v = std::sqrt(v) * g.spacing();
  return sq;
}

Region influence_region(const Region& omega, double s) {
  require(s >= 0.0, "influence_region: s must be nonnegative");
  auto d = distance_field(omega);
  const double lim = s + 0.5 * omega.grid().spacing();
  std::vector<std::uint8_t> mask(d.size());
  for (std::size_t n = 0; n < d.size(); ++n) mask[n] = d[n] <= lim;
  return Region(omega.grid_ptr(), std::move(mask), RegionKind::influence);
}

double max_distance(const Region& k, const Region& omega) {
  require(k.grid() == omega.grid(), "region grid mismatch");
  auto d = distance_field(omega);
  double m = 0.0;
  for (std::size_t n : k.nodes()) m = std::max(m, d[n]);
  return m;
}

BoundaryFrame boundary_frame(Point x0, const Region& omega) {
  require(!omega.empty(), "boundary frame: omega is empty");
  const auto& g = omega.grid();
  const auto boundary = omega.boundary_nodes();
  require(!boundary.empty(), "boundary frame: omega has no boundary nodes");
  BoundaryFrame f;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t n : boundary) {
    const double d = norm(g.position(n) - x0);
    if (d < best) {
      best = d;
      f.node = n;
    }
  }
  f.y = g.position(f.node);
  f.distance = std::numeric_limits<double>::infinity();
  for (std::size_t n : omega.nodes()) f.distance = std::min(f.distance, norm(g.position(n) - x0));

  const auto dist = distance_field(omega);
  const auto [i, j] = g.coords(f.node);
  const double h = g.spacing();
  auto d_at = [&](int a, int b) {
    a = std::clamp(a, 0, g.count(0) - 1);
    b = std::clamp(b, 0, g.count(1) - 1);
    return dist[g.index(a, b)];
  };
  Point grad{(d_at(i + 1, j) - d_at(i - 1, j)) / (2 * h), 0.0};
  if (g.dim() == 2) grad.y = (d_at(i, j + 1) - d_at(i, j - 1)) / (2 * h);
  const double gn = norm(grad);
  require(gn > 0.0, "boundary frame: normal undefined at the boundary point");
  f.normal = (1.0 / gn) * grad;
  return f;
}

}  // namespace bcm
