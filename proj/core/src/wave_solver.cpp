#include "bcm/wave_solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "bcm/error.hpp"
#include "bcm/quadrature.hpp"

namespace bcm {

// ------------------------------------------------------------------ Potential

Potential::Potential(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}

Potential::Potential(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require(values_.size() == grid_->size(), "potential size does not match grid");
  for (double v : values_) require(std::isfinite(v), "potential values must be finite");
}

Potential Potential::from_bumps(GridPtr grid, std::span<const GaussianBump> bumps) {
  std::vector<double> v(grid->size(), 0.0);
  for (const auto& b : bumps) {
    require(b.width > 0.0, "bump width must be positive");
    for (std::size_t n = 0; n < v.size(); ++n) {
      Point d = grid->position(n) - b.center;
      v[n] += b.amplitude * std::exp(-dot(d, d) / (2.0 * b.width * b.width));
    }
  }
  return Potential(std::move(grid), std::move(v));
}

double Potential::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool Potential::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

void Potential::set_bound(double M, int m) {
  require(M >= sup_norm(), "potential sup norm exceeds the declared bound M");
  bound_ = M;
  order_ = m;
}

double Potential::interpolate(Point p) const {
  const auto& g = *grid_;
  const double h = g.spacing();
  auto locate = [&](double v, int axis, int& i, double& w) {
    double s = (v - g.lower(axis)) / h;
    if (s < 0.0 || s > g.count(axis) - 1) return false;
    i = std::min(static_cast<int>(std::floor(s)), g.count(axis) - 2);
    w = s - i;
    return true;
  };
  int i = 0, j = 0;
  double wx = 0.0, wy = 0.0;
  if (!locate(p.x, 0, i, wx)) return 0.0;
  if (g.dim() == 1) return (1.0 - wx) * values_[i] + wx * values_[i + 1];
  if (!locate(p.y, 1, j, wy)) return 0.0;
  return (1.0 - wx) * (1.0 - wy) * values_[g.index(i, j)] + wx * (1.0 - wy) * values_[g.index(i + 1, j)] +
         (1.0 - wx) * wy * values_[g.index(i, j + 1)] + wx * wy * values_[g.index(i + 1, j + 1)];
}

// ------------------------------------------------------------- SpaceTimeField

SpaceTimeField::SpaceTimeField(GridPtr grid, TimeGrid time, std::vector<int> steps)
    : grid_(std::move(grid)), time_(time), steps_(std::move(steps)) {
  std::sort(steps_.begin(), steps_.end());
  steps_.erase(std::unique(steps_.begin(), steps_.end()), steps_.end());
  for (int k : steps_) require(k >= 0 && k <= time_.steps(), "stored step outside the time grid");
  snaps_.reserve(steps_.size());
  for (std::size_t i = 0; i < steps_.size(); ++i) snaps_.emplace_back(grid_);
}

bool SpaceTimeField::has(int step) const { return std::binary_search(steps_.begin(), steps_.end(), step); }

std::size_t SpaceTimeField::slot(int step) const {
  auto it = std::lower_bound(steps_.begin(), steps_.end(), step);
  if (it == steps_.end() || *it != step) {
    std::ostringstream os;
    os << "snapshot for step " << step << " was not stored";
    fail_validation(os.str());
  }
  return static_cast<std::size_t>(it - steps_.begin());
}

const ScalarField& SpaceTimeField::at(int step) const { return snaps_[slot(step)]; }
ScalarField& SpaceTimeField::at(int step) { return snaps_[slot(step)]; }

// --------------------------------------------------------------------- solver

namespace {

using Injector = std::function<void(int, double, std::span<Complex>, std::span<double>)>;

template <class T>
SolveResult run_leapfrog(const WaveSolver& s, const SolveOptions& opt, std::array<int, 4> box,
                         const Injector& inject, int first_step) {
  const auto& g = s.grid();
  const auto& time = s.time();
  time.check_cfl(g.spacing(), g.dim());
  const int H = opt.horizon < 0 ? time.steps() : opt.horizon;
  require(H >= 1 && H <= time.steps(), "solve horizon outside the time grid");

  std::vector<int> stored;
  if (opt.storage == Storage::all) {
    require(H <= 4000, "full snapshot storage is limited to 4000 steps; declare stored steps");
    for (int k = 0; k <= H; ++k) stored.push_back(k);
  } else if (opt.storage == Storage::selected) {
    for (int k : opt.stored_steps) {
      require(k >= 0 && k <= H, "stored step beyond the solve horizon");
      stored.push_back(k);
    }
  }

  const int nx = g.count(0), ny = g.count(1);
  const bool two_d = g.dim() == 2;
  {
    const int reach = H - 1;
    bool ok = box[0] - reach >= 2 && box[1] + reach <= nx - 3;
    if (two_d) ok = ok && box[2] - reach >= 2 && box[3] + reach <= ny - 3;
    if (!ok) fail_validation("source reaches the box boundary within the horizon; enlarge the padding");
  }

  SolveResult res{SpaceTimeField(s.potential().grid_ptr(), time, stored), std::nullopt};
  const Region* obs = opt.observe.get();
  if (obs) {
    require(obs->grid() == g, "observation region grid mismatch");
    res.trace.emplace(opt.observe, time);
  }

  const std::size_t N = g.size();
  const double dt = time.dt();
  const double dt2 = dt * dt;
  const double h = g.spacing();
  const double r2 = dt2 / (h * h);
  std::vector<double> coef(N);
  const auto qv = s.potential().values();
  for (std::size_t n = 0; n < N; ++n) coef[n] = 2.0 - (two_d ? 4.0 : 2.0) * r2 - dt2 * qv[n];

  std::vector<T> prev(N), cur(N), next(N);
  std::vector<Complex> widen;
  if (opt.on_step && std::is_same_v<T, double>) widen.resize(N);

  auto record = [&](int k, const std::vector<T>& u) {
    if (res.field.has(k)) {
      auto dst = res.field.at(k).values();
      for (std::size_t n = 0; n < N; ++n) dst[n] = u[n];
    }
    if (obs) {
      auto row = res.trace->row(k);
      auto nodes = obs->nodes();
      for (std::size_t j = 0; j < nodes.size(); ++j) row[j] = u[nodes[j]];
    }
    if (opt.on_step) {
      if constexpr (std::is_same_v<T, double>) {
        for (std::size_t n = 0; n < N; ++n) widen[n] = u[n];
        opt.on_step(k, widen);
      } else {
        opt.on_step(k, std::span<const Complex>(u));
      }
    }
  };

  auto source_into_next = [&](int k, double scale) {
    if constexpr (std::is_same_v<T, double>) inject(k, scale, {}, next);
    else inject(k, scale, next, {});
  };

  record(0, cur);
  if (first_step <= 0) source_into_next(0, 0.5 * dt2);
  std::swap(prev, cur);
  std::swap(cur, next);
  record(1, cur);

  int i0 = box[0], i1 = box[1], j0 = box[2], j1 = box[3];
  for (int k = 1; k < H; ++k) {
    if (k < first_step) {  // field still identically zero
      record(k + 1, cur);
      continue;
    }
    i0 = std::max(i0 - 1, 1);
    i1 = std::min(i1 + 1, nx - 2);
    if (two_d) {
      j0 = std::max(j0 - 1, 1);
      j1 = std::min(j1 + 1, ny - 2);
      for (int j = j0; j <= j1; ++j) {
        const std::size_t row = static_cast<std::size_t>(j) * nx;
        for (int i = i0; i <= i1; ++i) {
          const std::size_t n = row + i;
          next[n] = coef[n] * cur[n] - prev[n] + r2 * (cur[n - 1] + cur[n + 1] + cur[n - nx] + cur[n + nx]);
        }
      }
    } else {
      for (int i = i0; i <= i1; ++i)
        next[i] = coef[i] * cur[i] - prev[i] + r2 * (cur[i - 1] + cur[i + 1]);
    }
    source_into_next(k, dt2);
    std::swap(prev, cur);
    std::swap(cur, next);
    record(k + 1, cur);
  }
  return res;
}

}  // namespace

WaveSolver::WaveSolver(PotentialPtr q, TimeGrid time) : q_(std::move(q)), time_(time) {
  require(q_ != nullptr, "solver needs a potential");
  time_.check_cfl(q_->grid().spacing(), q_->grid().dim());
}

SolveResult WaveSolver::solve(const BoundaryData& f, const SolveOptions& opt) const {
  require(f.region().grid() == grid(), "source grid does not match the potential grid");
  require(f.time() == time_, "source time grid does not match the solver");
  const auto nodes = f.region().nodes();
  const auto w = f.region().weights();
  const int kb = f.window_begin(), ke = f.window_end();
  Injector inject = [&](int k, double scale, std::span<Complex> zc, std::span<double> zr) {
    if (k < kb || k > ke) return;
    auto row = f.row(k);
    if (!zr.empty()) {
      for (std::size_t j = 0; j < nodes.size(); ++j) zr[nodes[j]] += scale * w[j] * row[j].real();
    } else {
      for (std::size_t j = 0; j < nodes.size(); ++j) zc[nodes[j]] += scale * w[j] * row[j];
    }
  };
  auto box = f.region().bounding_box();
  int first = kb;
  while (first <= ke) {
    auto row = f.row(first);
    if (std::any_of(row.begin(), row.end(), [](Complex z) { return z != Complex{}; })) break;
    ++first;
  }
  if (f.is_real()) return run_leapfrog<double>(*this, opt, box, inject, first);
  return run_leapfrog<Complex>(*this, opt, box, inject, first);
}

SolveResult WaveSolver::solve(const FieldSource& f, const SolveOptions& opt) const {
  std::vector<Complex> buf(grid().size());
  const auto sb = f.support;
  const auto& g = grid();
  Injector inject = [&](int k, double scale, std::span<Complex> zc, std::span<double> zr) {
    std::fill(buf.begin(), buf.end(), Complex{});
    f.eval(k, buf);
    for (int j = sb[2]; j <= sb[3]; ++j)
      for (int i = sb[0]; i <= sb[1]; ++i) {
        std::size_t n = g.index(i, j);
        if (!zr.empty()) zr[n] += scale * buf[n].real();
        else zc[n] += scale * buf[n];
      }
  };
  auto box = sb;
  if (g.dim() == 1) box[2] = box[3] = 0;
  if (f.real) return run_leapfrog<double>(*this, opt, box, inject, 0);
  return run_leapfrog<Complex>(*this, opt, box, inject, 0);
}

SpaceTimeField solve_forward(const PotentialPtr& q, const BoundaryData& f) {
  WaveSolver solver(q, f.time());
  SolveOptions opt;
  opt.storage = Storage::all;
  return std::move(solver.solve(f, opt).field);
}

double energy(const SpaceTimeField& u, const Potential& q, int step) {
  const auto& a = u.at(step + 1);
  const auto& b = u.at(step);
  const auto& g = u.grid();
  require(g == q.grid(), "energy: potential grid mismatch");
  const double dt = u.time().dt();
  const double h = g.spacing();
  double kin = 0.0, pot = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    kin += std::norm((a[n] - b[n]) / dt);
    pot += q[n] * (a[n] * std::conj(b[n])).real();
  }
  double grad = 0.0;
  const int nx = g.count(0), ny = g.count(1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      std::size_t n = g.index(i, j);
      if (i + 1 < nx) {
        std::size_t m = g.index(i + 1, j);
        grad += ((a[m] - a[n]) * std::conj(b[m] - b[n])).real();
      }
      if (g.dim() == 2 && j + 1 < ny) {
        std::size_t m = g.index(i, j + 1);
        grad += ((a[m] - a[n]) * std::conj(b[m] - b[n])).real();
      }
    }
  return 0.5 * (kin + grad / (h * h) + pot) * g.cell_volume();
}

// ------------------------------------------------------------------- geometry

SpatialGrid padded_box(int dim, const Box& k, const Box& omega, const TimeGrid& time, double h) {
  const double pad = time.steps() * h + 4.0 * h;
  Point lo{std::min(k.lo.x, omega.lo.x) - pad, std::min(k.lo.y, omega.lo.y) - pad};
  Point hi{std::max(k.hi.x, omega.hi.x) + pad, std::max(k.hi.y, omega.hi.y) + pad};
  return SpatialGrid::covering(dim, lo, hi, h);
}

SpatialGrid padded_box(int dim, const Box& k, const Box& omega, double horizon, double cfl, double h) {
  return padded_box(dim, k, omega, TimeGrid::from_cfl(horizon, h, dim, cfl), h);
}

// --------------------------------------------------------------------- oracle

ScalarField dalembert_oracle_1d(const std::function<double(double, double)>& f, const GridPtr& grid,
                                double t, const OracleQuadrature& quad) {
  require(grid->dim() == 1, "the d'Alembert oracle is one-dimensional");
  ScalarField out(grid);
  const double ta = quad.t0, tb = std::min(quad.t1, t);
  if (tb <= ta) return out;
  for (std::size_t n = 0; n < grid->size(); ++n) {
    const double x = grid->position(n).x;
    auto inner = [&](double tau) {
      const double r = t - tau;
      const double a = std::max(x - r, quad.x0), b = std::min(x + r, quad.x1);
      if (b <= a) return 0.0;
      return gauss_legendre(a, b, quad.panels_space, [&](double y) { return f(tau, y); });
    };
    out[n] = 0.5 * gauss_legendre(ta, tb, quad.panels_time, inner);
  }
  return out;
}

// ------------------------------------------------------------------ snapshots

void write_snapshot(const std::string& path, const ScalarField& u, double dt) {
  static_assert(std::endian::native == std::endian::little, "snapshot format is little-endian");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail_validation("cannot open snapshot file " + path);
  const auto& g = u.grid();
  std::int32_t header[3] = {g.dim(), g.count(0), g.count(1)};
  os.write(reinterpret_cast<const char*>(header), sizeof header);
  double hd[2] = {g.spacing(), dt};
  os.write(reinterpret_cast<const char*>(hd), sizeof hd);
  for (const Complex& z : u.values()) {
    double p[2] = {z.real(), z.imag()};
    os.write(reinterpret_cast<const char*>(p), sizeof p);
  }
}

ScalarField read_snapshot(const std::string& path, double* dt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail_validation("cannot open snapshot file " + path);
  std::int32_t header[3];
  double hd[2];
  is.read(reinterpret_cast<char*>(header), sizeof header);
  is.read(reinterpret_cast<char*>(hd), sizeof hd);
  if (!is) fail_validation("truncated snapshot header in " + path);
  auto grid = std::make_shared<const SpatialGrid>(header[0], Point{}, hd[0], std::array<int, 2>{header[1], header[2]});
  ScalarField u(grid);
  for (auto& z : u.values()) {
    double p[2];
    is.read(reinterpret_cast<char*>(p), sizeof p);
    z = {p[0], p[1]};
  }
  if (!is) fail_validation("truncated snapshot body in " + path);
  if (dt) *dt = hd[1];
  return u;
}

}  // namespace bcm
