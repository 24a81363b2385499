#include "bcm/geometric_optics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>

#include "bcm/error.hpp"
#include "bcm/format.hpp"
#include "bcm/stats.hpp"

namespace bcm {

namespace {

constexpr Complex kI{0.0, 1.0};

int clamp_index(int v, int lo, int hi) { return std::clamp(v, lo, hi); }

// Nodes within `radius` of the segment [a, b].
std::array<int, 4> segment_box(const SpatialGrid& g, Point a, Point b, double radius) {
  const double h = g.spacing();
  auto lo_hi = [&](double u, double v, int axis) {
    const double lo = std::min(u, v) - radius, hi = std::max(u, v) + radius;
    int i0 = static_cast<int>(std::floor((lo - g.lower(axis)) / h));
    int i1 = static_cast<int>(std::ceil((hi - g.lower(axis)) / h));
    return std::pair{clamp_index(i0, 0, g.count(axis) - 1), clamp_index(i1, 0, g.count(axis) - 1)};
  };
  auto [i0, i1] = lo_hi(a.x, b.x, 0);
  std::array<int, 4> box{i0, i1, 0, 0};
  if (g.dim() == 2) {
    auto [j0, j1] = lo_hi(a.y, b.y, 1);
    box[2] = j0;
    box[3] = j1;
  }
  return box;
}

template <class F>
void for_box(const std::array<int, 4>& box, const SpatialGrid& g, F&& fn) {
  for (int j = box[2]; j <= box[3]; ++j)
    for (int i = box[0]; i <= box[1]; ++i) fn(g.index(i, j));
}

}  // namespace

// ------------------------------------------------------------------- cutoffs

SmoothStep SmoothStep::at(double z) {
  SmoothStep s;
  if (z <= 0.0) return s;
  if (z >= 1.0) {
    s.value = 1.0;
    return s;
  }
  const double g = 1.0 / z - 1.0 / (1.0 - z);
  if (g > 700.0) return s;
  if (g < -700.0) {
    s.value = 1.0;
    return s;
  }
  const double L = 1.0 / (1.0 + std::exp(g));
  const double g1 = -1.0 / (z * z) - 1.0 / ((1.0 - z) * (1.0 - z));
  const double g2 = 2.0 / (z * z * z) - 2.0 / ((1.0 - z) * (1.0 - z) * (1.0 - z));
  const double l1 = L * (1.0 - L);
  s.value = L;
  s.d1 = -l1 * g1;
  s.d2 = l1 * (1.0 - 2.0 * L) * g1 * g1 - l1 * g2;
  return s;
}

double PlateauBump::value(Point x) const {
  Point d = x - center;
  if (dim == 1) d.y = 0.0;
  const double rho = norm(d);
  if (rho <= plateau) return 1.0;
  if (rho >= plateau + transition) return 0.0;
  return 1.0 - SmoothStep::at((rho - plateau) / transition).value;
}

BumpJet PlateauBump::jet(Point x) const {
  BumpJet j;
  Point d = x - center;
  if (dim == 1) d.y = 0.0;
  const double rho = norm(d);
  if (rho <= plateau) {
    j.value = 1.0;
    return j;
  }
  if (rho >= plateau + transition) return j;
  const auto st = SmoothStep::at((rho - plateau) / transition);
  const double p1 = -st.d1 / transition;
  const double p2 = -st.d2 / (transition * transition);
  j.value = 1.0 - st.value;
  const Point u = (1.0 / rho) * d;
  j.grad = p1 * u;
  if (dim == 1) {
    j.hxx = p2;
    j.laplacian = p2;
    return j;
  }
  const double t = p1 / rho;
  j.hxx = p2 * u.x * u.x + t * (1.0 - u.x * u.x);
  j.hyy = p2 * u.y * u.y + t * (1.0 - u.y * u.y);
  j.hxy = (p2 - t) * u.x * u.y;
  j.laplacian = j.hxx + j.hyy;
  return j;
}

// --------------------------------------------------------------------- probe

GOProbe::GOProbe(const SourceToSolutionMap& map, const ProbeParams& p)
    : p_(p), grid_(map.potential().grid_ptr()), time_(map.time()), omega_(map.omega()), q_(map.potential_ptr()) {
  require(p.eta > 0.0, "probe cutoff radius eta must be positive");
  require(p.sigma >= 0.0, "probe frequency must be non-negative");
  require(p.order >= 0, "probe order must be non-negative");
  require(p.sigma > 0.0 || p.order == 0, "a probe of order N >= 1 needs sigma > 0");
  const auto& g = *grid_;
  const double h = g.spacing();
  require(p.eta >= 2.0 * h, "probe cutoff radius must span at least two grid spacings");

  const BoundaryFrame fr = boundary_frame(p.x0, *omega_);
  require(fr.distance > 0.0, "probe target x0 lies inside omega");
  y_ = fr.y;
  nu_ = fr.normal;
  s_ = fr.distance;

  if (p_.delta <= 0.0) {
    double r = h, best = 0.0;
    while (true) {
      Region ball = Region::ball(grid_, y_ - r * nu_, r, RegionKind::ball);
      if (!ball.subset_of(*omega_)) break;
      best = r;
      r += h;
    }
    require(best > 0.0, "no inner normal ball fits in omega at the boundary point");
    p_.delta = 0.5 * best;
  }

  chi_ = PlateauBump{{0.0, 0.0}, p_.eta, p_.eta, g.dim()};

  // chi~: plateau over the initial bump and the first step, transition up to
  // a one-node margin from the boundary layer of omega.
  const Point b0 = beta(0.0);
  const auto dist_out = [&] {
    double d = std::numeric_limits<double>::infinity();
    const auto& mask = omega_->mask();
    for (std::size_t n = 0; n < g.size(); ++n)
      if (!mask[n]) d = std::min(d, norm(g.position(n) - b0));
    return d;
  }();
  const double plateau = 2.0 * p_.eta + 2.0 * h;
  const double transition = dist_out - plateau - 2.5 * h;
  if (!(transition > 0.0)) {
    fail_validation(format("probe cutoffs too wide: the initial bump at distance %g from the edge of omega needs "
                           "%g; reduce eta or delta",
                           dist_out, plateau + 2.5 * h));
  }
  outer_ = PlateauBump{b0, plateau, transition, g.dim()};

  const double reach = 2.0 * p_.eta + (p_.order + 2) * h;
  tube_ = segment_box(g, b0, beta(time_.horizon()), reach);
}

Point GOProbe::beta(double t) const { return p_.x0 - (s_delta() - t) * nu_; }

double GOProbe::phase(double t, Point x) const { return t - dot(x, nu_); }

double GOProbe::time_cutoff(double t) const {
  const PlateauBump psi{{s_delta(), 0.0}, p_.eta, p_.eta, 1};
  return psi.value({t, 0.0});
}

double GOProbe::points_per_wavelength() const {
  if (p_.sigma == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * std::numbers::pi / (p_.sigma * grid_->spacing());
}

// ------------------------------------------------------------------- ansatz

// Amplitudes a_1..a_N on a lattice xi = x - beta(t) that moves with the ray.
// In these coordinates the transport equations are ODEs in t per lattice
// point: d/dt a_l = (i/2) [(box + q) a_{l-1}], where
// box a = a_tt - 2 nu.grad a_t + (nu.grad)^2 a - Laplacian a.
struct AnsatzStream::Lattice {
  int dim = 1;
  int m = 0;      // half width in nodes
  int nx = 1, ny = 1;
  Point offset;   // xi of lattice index (0, 0) relative to the centre
  double h = 0;
  int steps = 0;  // stored steps 0..steps-1
  std::vector<std::vector<Complex>> level;  // level[l][k * size + p], l >= 1

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  Point xi(int i, int j) const { return {offset.x + (i - m) * h, dim == 2 ? offset.y + (j - m) * h : 0.0}; }

  // Bilinear interpolation of level l at step k.
  Complex sample(int l, int k, Point x) const {
    const auto* a = level[l].data() + static_cast<std::size_t>(k) * size();
    const double fx = (x.x - offset.x) / h + m;
    const int i = static_cast<int>(std::floor(fx));
    const double wx = fx - i;
    auto at = [&](int ii, int jj) -> Complex {
      if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) return {};
      return a[static_cast<std::size_t>(jj) * nx + ii];
    };
    if (dim == 1) return (1.0 - wx) * at(i, 0) + (wx == 0.0 ? Complex{} : wx * at(i + 1, 0));
    const double fy = (x.y - offset.y) / h + m;
    const int j = static_cast<int>(std::floor(fy));
    const double wy = fy - j;
    return (1.0 - wx) * (1.0 - wy) * at(i, j) + wx * (1.0 - wy) * at(i + 1, j) + (1.0 - wx) * wy * at(i, j + 1) +
           wx * wy * at(i + 1, j + 1);
  }
};

AnsatzStream::AnsatzStream(const GOProbe& probe, int last_step) : probe_(probe), last_(last_step) {
  const auto& g = probe.grid();
  const int N = probe.order();
  require(last_step >= 0 && last_step <= probe.time().steps(), "ansatz stream: last step outside the time grid");
  v_.assign(g.size(), Complex{});
  amp_.assign(N + 1, std::vector<Complex>(g.size(), Complex{}));
  if (N >= 1 && !probe.potential().is_zero()) {
    const auto& t = probe.tube();
    q_acc_.assign(static_cast<std::size_t>(t[1] - t[0] + 1) * (t[3] - t[2] + 1), 0.0);
  }
  if (N < 2) return;

  // Lattice recursion for l >= 2.
  auto lat = std::make_unique<Lattice>();
  const double h = g.spacing();
  const double dt = probe.time().dt();
  const Point nu = probe.normal();
  lat->dim = g.dim();
  lat->h = h;
  lat->m = static_cast<int>(std::ceil(2.0 * probe.eta() / h)) + N + 2;
  lat->nx = 2 * lat->m + 1;
  lat->ny = g.dim() == 2 ? lat->nx : 1;
  const Point b0 = probe.beta(0.0);
  const Point snapped = g.position(g.nearest_node(b0));
  lat->offset = snapped - b0;
  if (g.dim() == 1) lat->offset.y = 0.0;
  lat->steps = last_step + 2;
  require(lat->steps >= 4, "ansatz stream: orders N >= 2 need at least three steps");
  const std::size_t S = lat->size();
  const double budget = 2.5e7;
  if (static_cast<double>(S) * lat->steps * N > budget)
    fail_validation("ansatz stream: amplitude storage for N >= 2 exceeds the memory cap; lower N or the horizon");
  lat->level.assign(N + 1, {});
  const auto& chi = probe.chi();
  const auto& q = probe.potential();
  const double sigma = probe.sigma();
  (void)sigma;

  // a_1 on the lattice, with Q accumulated along the lattice points.
  {
    auto& a1 = lat->level[1];
    a1.assign(S * lat->steps, Complex{});
    std::vector<double> Q(S, 0.0);
    for (int k = 0; k < lat->steps; ++k) {
      const double t = k * dt;
      for (int j = 0; j < lat->ny; ++j)
        for (int i = 0; i < lat->nx; ++i) {
          const std::size_t p = static_cast<std::size_t>(j) * lat->nx + i;
          const Point xi = lat->xi(i, j);
          const auto jet = chi.jet(xi);
          const double b = jet.hxx * nu.x * nu.x + 2.0 * jet.hxy * nu.x * nu.y + jet.hyy * nu.y * nu.y - jet.laplacian;
          a1[k * S + p] = 0.5 * kI * (t * b + jet.value * Q[p]);
          Q[p] += dt * q.interpolate(xi + probe.beta(t + 0.5 * dt));
        }
    }
  }

  const int K = lat->steps;
  const double idt = 1.0 / dt, idt2 = 1.0 / (dt * dt), ih = 1.0 / h, ih2 = 1.0 / (h * h);
  std::vector<Complex> G(S * K), at(S), att(S);
  for (int l = 2; l <= N; ++l) {
    const auto& prev = lat->level[l - 1];
    auto val = [&](int k, int i, int j) -> Complex {
      if (i < 0 || i >= lat->nx || j < 0 || j >= lat->ny) return {};
      return prev[k * S + static_cast<std::size_t>(j) * lat->nx + i];
    };
    for (int k = 0; k < K; ++k) {
      // a_t and a_tt, one-sided at the ends
      for (std::size_t p = 0; p < S; ++p) {
        auto a = [&](int kk) { return prev[kk * S + p]; };
        if (k == 0) {
          at[p] = (-3.0 * a(0) + 4.0 * a(1) - a(2)) * (0.5 * idt);
          att[p] = (2.0 * a(0) - 5.0 * a(1) + 4.0 * a(2) - a(3)) * idt2;
        } else if (k == K - 1) {
          at[p] = (3.0 * a(k) - 4.0 * a(k - 1) + a(k - 2)) * (0.5 * idt);
          att[p] = (2.0 * a(k) - 5.0 * a(k - 1) + 4.0 * a(k - 2) - a(k - 3)) * idt2;
        } else {
          at[p] = (a(k + 1) - a(k - 1)) * (0.5 * idt);
          att[p] = (a(k + 1) - 2.0 * a(k) + a(k - 1)) * idt2;
        }
      }
      auto atv = [&](int i, int j) -> Complex {
        if (i < 0 || i >= lat->nx || j < 0 || j >= lat->ny) return {};
        return at[static_cast<std::size_t>(j) * lat->nx + i];
      };
      const double t = k * dt;
      for (int j = 0; j < lat->ny; ++j)
        for (int i = 0; i < lat->nx; ++i) {
          const std::size_t p = static_cast<std::size_t>(j) * lat->nx + i;
          const Complex c = val(k, i, j);
          const Complex dxx = (val(k, i + 1, j) - 2.0 * c + val(k, i - 1, j)) * ih2;
          const Complex dtx = (atv(i + 1, j) - atv(i - 1, j)) * (0.5 * ih);
          Complex nn = nu.x * nu.x * dxx, lap = dxx, ngt = nu.x * dtx;
          if (lat->dim == 2) {
            const Complex dyy = (val(k, i, j + 1) - 2.0 * c + val(k, i, j - 1)) * ih2;
            const Complex dxy =
                (val(k, i + 1, j + 1) - val(k, i + 1, j - 1) - val(k, i - 1, j + 1) + val(k, i - 1, j - 1)) *
                (0.25 * ih2);
            const Complex dty = (atv(i, j + 1) - atv(i, j - 1)) * (0.5 * ih);
            nn += 2.0 * nu.x * nu.y * dxy + nu.y * nu.y * dyy;
            lap += dyy;
            ngt += nu.y * dty;
          }
          const double qv = q.interpolate(lat->xi(i, j) + probe.beta(t));
          G[k * S + p] = att[p] - 2.0 * ngt + nn - lap + qv * c;
        }
    }
    auto& cur = lat->level[l];
    cur.assign(S * K, Complex{});
    for (int k = 0; k + 1 < K; ++k)
      for (std::size_t p = 0; p < S; ++p)
        cur[(k + 1) * S + p] = cur[k * S + p] + 0.25 * kI * dt * (G[k * S + p] + G[(k + 1) * S + p]);
  }
  lattice_ = std::move(lat);
}

AnsatzStream::~AnsatzStream() = default;

std::span<const Complex> AnsatzStream::amplitude(int l) const {
  require(l >= 0 && l <= probe_.order(), "ansatz stream: amplitude index outside 0..N");
  return amp_[l];
}

std::span<const Complex> AnsatzStream::advance() {
  require(step_ < last_, "ansatz stream advanced past its last step");
  const auto& g = probe_.grid();
  const int N = probe_.order();
  const double dt = probe_.time().dt();
  const double sigma = probe_.sigma();
  const Point nu = probe_.normal();
  const auto& tube = probe_.tube();

  // Accumulate Q from t_step to t_{step+1} before moving on.
  if (step_ >= 0 && !q_acc_.empty()) {
    const double tm = probe_.time().time(step_) + 0.5 * dt;
    const auto& q = probe_.potential();
    std::size_t p = 0;
    for (int j = tube[2]; j <= tube[3]; ++j)
      for (int i = tube[0]; i <= tube[1]; ++i, ++p)
        q_acc_[p] += dt * q.interpolate(g.position(g.index(i, j)) - tm * nu);
  }
  for_box(active_, g, [&](std::size_t n) {
    v_[n] = {};
    for (auto& a : amp_) a[n] = {};
  });

  ++step_;
  const double t = probe_.time().time(step_);
  const Point b = probe_.beta(t);
  const double reach = 2.0 * probe_.eta() + (N + 1) * g.spacing();
  active_ = segment_box(g, b, b, reach);
  for (int d = 0; d < 4; d += 2) {
    active_[d] = std::max(active_[d], tube[d]);
    active_[d + 1] = std::min(active_[d + 1], tube[d + 1]);
  }
  const auto& chi = probe_.chi();
  const int tube_nx = tube[1] - tube[0] + 1;
  for (int j = active_[2]; j <= active_[3]; ++j)
    for (int i = active_[0]; i <= active_[1]; ++i) {
      const std::size_t n = g.index(i, j);
      const Point x = g.position(n);
      const Point xi = x - b;
      Complex amp;
      if (N == 0) {
        amp = amp_[0][n] = chi.value(xi);
      } else {
        const auto jet = chi.jet(xi);
        const double b0 = jet.hxx * nu.x * nu.x + 2.0 * jet.hxy * nu.x * nu.y + jet.hyy * nu.y * nu.y - jet.laplacian;
        const double Q =
            q_acc_.empty() ? 0.0 : q_acc_[static_cast<std::size_t>(j - tube[2]) * tube_nx + (i - tube[0])];
        amp_[0][n] = jet.value;
        amp_[1][n] = 0.5 * kI * (t * b0 + jet.value * Q);
        amp = amp_[0][n] + amp_[1][n] / sigma;
        double scale = 1.0 / sigma;
        for (int l = 2; l <= N; ++l) {
          scale /= sigma;
          amp_[l][n] = lattice_->sample(l, step_, xi);
          amp += scale * amp_[l][n];
        }
      }
      v_[n] = sigma == 0.0 ? amp : amp * std::polar(1.0, sigma * probe_.phase(t, x));
    }
  return v_;
}

void sweep_ansatz(const GOProbe& probe, int last_step, const std::function<void(int, std::span<const Complex>)>& fn) {
  AnsatzStream st(probe, last_step);
  for (int k = 0; k <= last_step; ++k) fn(k, st.advance());
}

// ------------------------------------------------------------------- source

namespace {

// Discrete Laplacian of a full-grid field at node (i, j).
template <class Get>
Complex laplacian_at(const SpatialGrid& g, int i, int j, const Get& u) {
  const double ih2 = 1.0 / (g.spacing() * g.spacing());
  const Complex c = u(i, j);
  Complex s = u(i - 1, j) + u(i + 1, j) - 2.0 * c;
  if (g.dim() == 2) s += u(i, j - 1) + u(i, j + 1) - 2.0 * c;
  return s * ih2;
}

int source_last_step(const GOProbe& probe) {
  const auto& oc = probe.outer_cutoff();
  const double leave = oc.plateau + oc.transition + 2.0 * probe.eta() + (probe.order() + 2) * probe.grid().spacing();
  const int k = static_cast<int>(std::ceil(leave / probe.time().dt())) + 2;
  return std::min(k, probe.time().steps() - 1);
}

}  // namespace

BoundaryData build_source(const GOProbe& probe) {
  const auto& g = probe.grid();
  const auto& omega = *probe.omega();
  const TimeGrid& time = probe.time();
  const double dt = time.dt();
  const double idt2 = 1.0 / (dt * dt);
  const int kmax = source_last_step(probe);

  const auto& oc = probe.outer_cutoff();
  auto box = segment_box(g, oc.center, oc.center, oc.plateau + oc.transition + 2.0 * g.spacing());
  std::vector<double> chit(g.size(), 0.0);
  for_box(box, g, [&](std::size_t n) { chit[n] = oc.value(g.position(n)); });

  // Z^k = chi~ V^k on the cutoff box; rolling window of three steps.
  std::array<std::vector<Complex>, 3> Z;
  for (auto& z : Z) z.assign(g.size(), Complex{});
  BoundaryData out(probe.omega(), time);
  const auto weights = omega.weights();
  const int nx = g.count(0), ny = g.count(1);

  auto emit = [&](int k) {  // needs Z^{k-1}, Z^k, Z^{k+1}
    const auto& zm = Z[(k + 2) % 3];
    const auto& z0 = Z[k % 3];
    const auto& zp = Z[(k + 1) % 3];
    auto get = [&](int i, int j) -> Complex {
      if (i < 0 || i >= nx || j < 0 || j >= ny) return {};
      return z0[g.index(i, j)];
    };
    auto row = out.row(k);
    for (int j = box[2]; j <= box[3]; ++j)
      for (int i = box[0]; i <= box[1]; ++i) {
        const std::size_t n = g.index(i, j);
        const Complex hv = -((zp[n] - 2.0 * z0[n] + zm[n]) * idt2 - laplacian_at(g, i, j, get));
        if (hv == Complex{}) continue;
        const std::size_t loc = omega.local_index(n);
        if (loc == Region::npos || weights[loc] != 1.0) {
          fail_validation(format("probe source leaks outside the interior of omega at step %d; reduce eta or delta",
                                 k));
        }
        row[loc] = hv;
      }
  };

  AnsatzStream st(probe, kmax + 1);
  for (int k = 0; k <= kmax + 1; ++k) {
    auto v = st.advance();
    auto& z = Z[k % 3];
    for_box(box, g, [&](std::size_t n) { z[n] = chit[n] * v[n]; });
    if (k >= 2) emit(k - 1);
  }
  // The cutoff box must have emptied before the last emitted step.
  bool tail = false;
  for_box(box, g, [&](std::size_t n) { tail = tail || Z[(kmax + 1) % 3][n] != Complex{}; });
  if (tail) fail_validation("probe source does not leave the cutoff within the horizon; increase T");
  return out;
}

double source_h2_norm(const BoundaryData& h) {
  const auto& r = h.region();
  const auto& g = r.grid();
  const double dt = h.time().dt();
  const double hs = g.spacing();
  const int K = h.steps();
  const int nx = g.count(0), ny = g.count(1);
  auto val = [&](int k, int i, int j) -> Complex {
    if (k < 0 || k > K || i < 0 || i >= nx || j < 0 || j >= ny) return {};
    const std::size_t loc = r.local_index(g.index(i, j));
    return loc == Region::npos ? Complex{} : h.at(k, loc);
  };
  const bool two = g.dim() == 2;
  double total = 0.0;
  for (int k = 0; k <= K; ++k) {
    if (std::all_of(h.row(k).begin(), h.row(k).end(), [](Complex z) { return z == Complex{}; }) &&
        (k == 0 || std::all_of(h.row(k - 1).begin(), h.row(k - 1).end(), [](Complex z) { return z == Complex{}; })) &&
        (k == K || std::all_of(h.row(k + 1).begin(), h.row(k + 1).end(), [](Complex z) { return z == Complex{}; })))
      continue;
    const auto bb = r.bounding_box();
    for (int j = bb[2] - 1; j <= bb[3] + 1; ++j)
      for (int i = bb[0] - 1; i <= bb[1] + 1; ++i) {
        if (!two && j != 0) continue;
        const Complex c = val(k, i, j);
        const Complex ft = (val(k + 1, i, j) - val(k - 1, i, j)) / (2 * dt);
        const Complex ftt = (val(k + 1, i, j) - 2.0 * c + val(k - 1, i, j)) / (dt * dt);
        const Complex fx = (val(k, i + 1, j) - val(k, i - 1, j)) / (2 * hs);
        const Complex fxx = (val(k, i + 1, j) - 2.0 * c + val(k, i - 1, j)) / (hs * hs);
        const Complex ftx = (val(k + 1, i + 1, j) - val(k + 1, i - 1, j) - val(k - 1, i + 1, j) +
                             val(k - 1, i - 1, j)) /
                            (4 * dt * hs);
        double s = std::norm(c) + std::norm(ft) + std::norm(ftt) + std::norm(fx) + std::norm(fxx) + std::norm(ftx);
        if (two) {
          const Complex fy = (val(k, i, j + 1) - val(k, i, j - 1)) / (2 * hs);
          const Complex fyy = (val(k, i, j + 1) - 2.0 * c + val(k, i, j - 1)) / (hs * hs);
          const Complex fxy = (val(k, i + 1, j + 1) - val(k, i + 1, j - 1) - val(k, i - 1, j + 1) +
                               val(k, i - 1, j - 1)) /
                              (4 * hs * hs);
          const Complex fty = (val(k + 1, i, j + 1) - val(k + 1, i, j - 1) - val(k - 1, i, j + 1) +
                               val(k - 1, i, j - 1)) /
                              (4 * dt * hs);
          s += std::norm(fy) + std::norm(fyy) + 2.0 * std::norm(fxy) + std::norm(fty);
        }
        total += s;
      }
  }
  return std::sqrt(total * dt * g.cell_volume());
}

double ansatz_residual(const GOProbe& probe, int last_step) {
  const auto& g = probe.grid();
  require(last_step >= 2, "ansatz residual needs at least two steps");
  const double dt = probe.time().dt();
  const double idt2 = 1.0 / (dt * dt);
  const auto& q = probe.potential();
  const auto box = probe.tube();
  const int nx = g.count(0), ny = g.count(1);
  std::array<std::vector<Complex>, 3> V;
  for (auto& v : V) v.assign(g.size(), Complex{});
  double total = 0.0;
  AnsatzStream st(probe, last_step);
  for (int k = 0; k <= last_step; ++k) {
    auto v = st.advance();
    auto& dst = V[k % 3];
    for_box(box, g, [&](std::size_t n) { dst[n] = v[n]; });
    if (k < 2) continue;
    const int c = k - 1;
    const auto& zm = V[(c + 2) % 3];
    const auto& z0 = V[c % 3];
    const auto& zp = V[(c + 1) % 3];
    auto get = [&](int i, int j) -> Complex {
      if (i < 0 || i >= nx || j < 0 || j >= ny) return {};
      return z0[g.index(i, j)];
    };
    for (int j = box[2]; j <= box[3]; ++j)
      for (int i = box[0]; i <= box[1]; ++i) {
        const std::size_t n = g.index(i, j);
        const Complex r = (zp[n] - 2.0 * z0[n] + zm[n]) * idt2 - laplacian_at(g, i, j, get) + q[n] * z0[n];
        total += std::norm(r);
      }
  }
  return std::sqrt(total * dt * g.cell_volume());
}

// ---------------------------------------------------------------- remainder

namespace {

double remainder_with_source(const SourceToSolutionMap& map, const GOProbe& probe, const BoundaryData& src) {
  const auto& g = probe.grid();
  const auto& time = probe.time();
  const int kr = std::min(time.steps(), static_cast<int>(std::lround((probe.s_delta() + 2.0 * probe.eta()) / time.dt())));
  require(kr >= 2, "remainder window is shorter than two steps");
  std::vector<double> one_minus(g.size());
  const auto& oc = probe.outer_cutoff();
  for (std::size_t n = 0; n < g.size(); ++n) one_minus[n] = 1.0 - oc.value(g.position(n));

  AnsatzStream st(probe, kr);
  double total = 0.0;
  SolveOptions opt;
  opt.horizon = kr;
  opt.on_step = [&](int k, std::span<const Complex> u) {
    auto v = st.advance();
    require(st.step() == k, "remainder: solver and ansatz out of step");
    double s = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) s += std::norm(u[n] - one_minus[n] * v[n]);
    total += trapezoid_weight(k, 0, kr) * s;
  };
  map.solver().solve(src, opt);
  return std::sqrt(total * time.dt() * g.cell_volume());
}

}  // namespace

double remainder_norm(const SourceToSolutionMap& map, const GOProbe& probe) {
  return remainder_with_source(map, probe, build_source(probe));
}

DecayReport remainder_check(const SourceToSolutionMap& map, ProbeParams p, const std::vector<double>& sigmas) {
  require(!sigmas.empty(), "remainder check needs a sigma schedule");
  DecayReport rep;
  rep.rows.resize(sigmas.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < sigmas.size(); ++i) try {
    ProbeParams pi = p;
    pi.sigma = sigmas[i];
    GOProbe probe(map, pi);
    const BoundaryData src = build_source(probe);
    auto& row = rep.rows[i];
    row.sigma = sigmas[i];
    row.ppw_flag = probe.points_per_wavelength() < 10.0;
    row.l2_remainder = remainder_with_source(map, probe, src);
    row.h2_source_norm = source_h2_norm(src);
  } catch (...) {
#pragma omp critical
    if (!err) err = std::current_exception();
  }
  if (err) std::rethrow_exception(err);
  std::vector<double> ls, lr, lh;
  for (const auto& r : rep.rows) {
    if (r.ppw_flag || !(r.l2_remainder > 0.0) || !(r.h2_source_norm > 0.0)) continue;
    ls.push_back(std::log(r.sigma));
    lr.push_back(std::log(r.l2_remainder));
    lh.push_back(std::log(r.h2_source_norm));
  }
  rep.fitted = static_cast<int>(ls.size());
  rep.slope = fit_line(ls, lr).slope;
  rep.h2_slope = fit_line(ls, lh).slope;
  return rep;
}

void write_decay_csv(std::ostream& os, const DecayReport& r) {
  os << "sigma,l2_remainder,h2_source_norm,ppw_flag\n";
  for (const auto& row : r.rows)
    os << format("%.17g,%.17g,%.17g,%d\n", row.sigma, row.l2_remainder, row.h2_source_norm, row.ppw_flag ? 1 : 0);
}

ScalarField probe_field(const SourceToSolutionMap& map, const GOProbe& probe, int step) {
  require(step >= 1 && step <= map.time().steps(), "probe field step outside the time grid");
  SolveOptions opt;
  opt.horizon = step;
  opt.storage = Storage::selected;
  opt.stored_steps = {step};
  auto res = map.solver().solve(build_source(probe), opt);
  return res.field.at(step);
}

LowerBound probe_lower_bound(const SourceToSolutionMap& map, ProbeParams p, const std::vector<double>& sigmas) {
  require(!sigmas.empty(), "probe lower bound needs a sigma schedule");
  std::vector<double> sched = sigmas;
  std::sort(sched.begin(), sched.end());
  LowerBound lb;
  for (double sigma : sched) {
    p.sigma = sigma;
    GOProbe probe(map, p);
    const int step = static_cast<int>(std::lround(probe.s_delta() / map.time().dt()));
    require(step <= map.time().steps(), "probe lower bound: s_delta lies beyond the horizon");
    const ScalarField u = probe_field(map, probe, step);
    const double v = std::abs(u[probe.grid().nearest_node(probe.x0())]);
    lb.values.emplace_back(sigma, v);
    if (v >= 0.5) {
      lb.achieved = true;
      lb.sigma0 = sigma;
      lb.margin = v - 0.5;
      return lb;
    }
  }
  lb.margin = lb.values.back().second - 0.5;
  return lb;
}

}  // namespace bcm
