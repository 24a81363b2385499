#include "bcm/boundary_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "bcm/error.hpp"
#include "bcm/format.hpp"

namespace bcm {

namespace {

BoundaryData truncated(const BoundaryData& f, int step) {
  BoundaryData out(f);
  out.set_window(0, step - 1);
  return out;
}

struct Projector {
  int k0, k1;
  const Region* support;  // null when the support is all of omega

  BoundaryData operator()(BoundaryData x) const {
    x.set_window(k0, k1);
    if (support) x.restrict_nodes(*support);
    return x;
  }
};

}  // namespace

std::pair<int, int> control_window(const ControlProblem& p, const TimeGrid& time) {
  const int k = p.eval_step;
  const int sigma = static_cast<int>(std::lround(p.influence / time.dt()));
  return {std::max(0, k - sigma - 1), k - 1};
}

Region control_target_region(const ControlProblem& p, const Region& omega) {
  return influence_region(p.support ? *p.support : omega, p.influence);
}

double misfit_from_data(const ConnectingOperator& k, const BoundaryData& g, const BoundaryData& f, int eval_step) {
  const auto kt = k.with_horizon(2 * eval_step);
  const BoundaryData ft = truncated(f, eval_step);
  const BoundaryData gt = truncated(g, eval_step);
  const BoundaryData kf = kt.apply(ft);
  const BoundaryData kg = kt.apply(gt);
  const auto ip = [&](const BoundaryData& a, const BoundaryData& b) { return boundary_inner(a, b, 0, eval_step); };
  return (ip(gt, kg) - 2.0 * ip(gt, kf).real() + ip(ft, kf)).real();
}

ControlSolution solve_control(const ConnectingOperator& k, const ControlProblem& p, const BoundaryData* guess) {
  const auto& time = k.map().time();
  const int kt_step = p.eval_step;
  require(kt_step >= 1 && 2 * kt_step <= k.horizon(), "control: evaluation time must lie in (0, T/2]");
  require(p.influence > 0.0, "control: influence time s must be positive");
  require(p.alpha > 0.0, "control: alpha must be positive");
  require(p.source.time() == time, "control: source time grid mismatch");
  const Region& omega = *k.map().omega();
  if (p.support) require(p.support->subset_of(omega), "control: support must lie inside omega");

  const auto [k0, k1] = control_window(p, time);
  const Projector proj{k0, k1, p.support ? p.support.get() : nullptr};
  const auto kt = k.with_horizon(2 * kt_step);
  const BoundaryData ft = truncated(p.source, kt_step);
  const auto ip = [&](const BoundaryData& a, const BoundaryData& b) { return boundary_inner(a, b, 0, kt_step); };

  const BoundaryData kf = kt.apply(ft);
  const BoundaryData b = proj(kf);
  BoundaryData g = guess ? proj(*guess) : BoundaryData(k.map().omega(), time);
  const double tol = p.tol > 0 ? p.tol : std::min(1e-8, p.alpha / 100.0);
  const double alpha = p.alpha;
  auto op = [&](const BoundaryData& x) {
    BoundaryData y = proj(kt.apply(x));
    y.axpy(alpha, x);
    return y;
  };
  const CgReport rep = conjugate_gradient(op, b, g, ip, tol, p.max_iters);

  ControlSolution s{std::move(g)};
  const BoundaryData kg = kt.apply(s.g);
  s.alpha = alpha;
  s.g_norm = std::sqrt(ip(s.g, s.g).real());
  s.misfit = (ip(s.g, kg) - 2.0 * ip(s.g, kf).real() + ip(ft, kf)).real();
  s.objective = s.misfit + alpha * s.g_norm * s.g_norm;
  s.gamma_hat = gamma_estimate(s);
  s.iterations = rep.iterations;
  s.residual = rep.residual;
  s.converged = rep.converged;
  return s;
}

double gamma_estimate(const ControlSolution& s) {
  return std::max(0.0, s.objective - s.alpha * s.g_norm * s.g_norm);
}

std::vector<ControlSolution> solve_control_path(const ConnectingOperator& k, ControlProblem p,
                                                const std::vector<double>& alphas) {
  require(!alphas.empty(), "control path: empty alpha schedule");
  std::vector<ControlSolution> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    p.alpha = a;
    out.push_back(solve_control(k, p, out.empty() ? nullptr : &out.back().g));
  }
  return out;
}

std::size_t lcurve_knee(const std::vector<ControlSolution>& path, double flat_tol) {
  require(!path.empty(), "lcurve_knee: empty path");
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double a = path[i].misfit, b = path[i + 1].misfit;
    if (std::abs(a - b) <= flat_tol * std::max(std::abs(b), 1e-300)) return i;
  }
  return path.size() - 1;
}

void write_control_csv(std::ostream& os, const std::vector<ControlSolution>& path) {
  os << "alpha,iters,residual,A_alpha,gamma_hat,g_norm\n";
  for (const auto& s : path)
    os << format_real(s.alpha) << ',' << s.iterations << ',' << format_real(s.residual) << ','
       << format_real(s.objective) << ',' << format_real(s.gamma_hat) << ',' << format_real(s.g_norm) << '\n';
}

Complex indicator_inner(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h, int step_t,
                        int step_tp, double s, double alpha) {
  ControlProblem p{f, step_t, s, alpha, nullptr};
  const auto sol = solve_control(k, p);
  return inner_product_at_times(k, sol.g, h, step_t, step_tp);
}

Complex indicator_inner_intersection(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h,
                                     int step_t, int step_tp, double s, const RegionPtr& omega_prime,
                                     double s_prime, double alpha) {
  require(omega_prime != nullptr, "intersection: omega' missing");
  ControlProblem first{f, step_t, s_prime, alpha, omega_prime};
  const auto g1 = solve_control(k, first);
  ControlProblem second{g1.g, step_t, s, alpha, nullptr};
  const auto g2 = solve_control(k, second);
  return inner_product_at_times(k, g2.g, h, step_t, step_tp);
}

// ------------------------------------------------------------------- caps

CapRegion cap_build(Point x0, const RegionPtr& omega, double r, double eta) {
  require(omega != nullptr && !omega->empty(), "cap: omega is empty");
  require(r > 0.0 && eta > 0.0 && eta < r, "cap: need 0 < eta < r");
  const BoundaryFrame fr = boundary_frame(x0, *omega);
  require(fr.distance > 0.0, "cap: x0 lies inside omega");

  CapRegion c;
  c.x0 = x0;
  c.y = fr.y;
  c.normal = fr.normal;
  c.r = r;
  c.s = fr.distance;
  c.eta = eta;
  const auto gp = omega->grid_ptr();
  c.inner = std::make_shared<const Region>(Region::ball(gp, c.y - r * c.normal, r, RegionKind::ball));
  c.outer = std::make_shared<const Region>(Region::ball(gp, c.y - 2 * r * c.normal, 2 * r, RegionKind::ball));
  if (!c.inner->subset_of(*omega) || !c.outer->subset_of(*omega))
    fail_validation("cap: the balls of radius r and 2r tangent at y do not fit inside omega");
  const Region m1 = influence_region(*c.inner, c.s + eta);
  const Region m2 = influence_region(*c.outer, std::max(0.0, c.s - eta));
  c.cap = std::make_shared<const Region>(set_difference(m1, m2, RegionKind::cap));
  if (c.cap->empty()) fail_validation("cap: A(eta) is empty");
  c.volume = c.cap->volume();
  return c;
}

Complex cap_average(const ConnectingOperator& k, const CapRegion& cap, const BoundaryData& f,
                    const BoundaryData& h, int step_t, int step_tp, double alpha, CapDiagnostics* diag) {
  ControlProblem p1{f, step_t, cap.s + cap.eta, alpha, cap.inner};
  const auto g1 = solve_control(k, p1);
  ControlProblem p2{g1.g, step_t, std::max(cap.s - cap.eta, 0.5 * k.map().time().dt()), alpha, cap.outer};
  const auto g2 = solve_control(k, p2);
  if (diag) {
    diag->iterations = g1.iterations + g2.iterations;
    diag->residual = std::max(g1.residual, g2.residual);
    diag->converged = g1.converged && g2.converged;
  }
  const Complex t1 = inner_product_at_times(k, g1.g, h, step_t, step_tp);
  const Complex t2 = inner_product_at_times(k, g2.g, h, step_t, step_tp);
  return (t1 - t2) / cap.volume;
}

PointValue point_value_product(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h,
                               int step_t, int step_tp, Point x0, double r, const std::vector<CapStep>& schedule,
                               double rel_tol) {
  require(!schedule.empty(), "point value: empty schedule");
  PointValue pv;
  if (f.is_zero() || h.is_zero()) {
    pv.converged = true;
    return pv;
  }
  for (const auto& st : schedule) {
    const CapRegion cap = cap_build(x0, k.map().omega(), r, st.eta);
    require(step_t * k.map().time().dt() > cap.s, "point value: t must exceed dist(x0, omega)");
    pv.value = cap_average(k, cap, f, h, step_t, step_tp, st.alpha);
    pv.history.push_back(pv.value);
    ++pv.stages;
    if (pv.history.size() >= 2) {
      const Complex prev = pv.history[pv.history.size() - 2];
      if (std::abs(pv.value - prev) <= rel_tol * std::abs(pv.value)) {
        pv.converged = true;
        break;
      }
    }
  }
  return pv;
}

// ------------------------------------------------------------ cost of control

CostTable cost_of_control_estimate(const ConnectingOperator& k, const BoundaryData& f, int step_t, double s,
                                   const std::vector<double>& eps_schedule, double alpha_min, double alpha_max,
                                   int bisection_steps) {
  require(!eps_schedule.empty(), "cost: empty eps schedule");
  require(0.0 < alpha_min && alpha_min < alpha_max, "cost: invalid alpha range");
  const auto& map = k.map();
  const Region whole = Region::whole(map.potential().grid_ptr());
  const Region target = influence_region(*map.omega(), s);

  auto field_at = [&](const BoundaryData& src) {
    SolveOptions opt;
    opt.horizon = step_t;
    opt.storage = Storage::selected;
    opt.stored_steps = {step_t};
    return map.solver().solve(truncated(src, step_t), opt).field.at(step_t);
  };
  const ScalarField uf = field_at(f);
  const ScalarField v = uf.restricted(target);

  CostTable table;
  table.target_h1 = h1_norm(uf, target);
  table.target_l2 = l2_norm(v, whole);
  require(table.target_h1 > 0.0, "cost: target is zero");

  struct Sample {
    double err, norm;
  };
  std::map<double, Sample> pool;
  std::map<double, BoundaryData> controls;
  ControlProblem p{f, step_t, s, alpha_max, nullptr};
  auto eval = [&](double alpha) -> Sample {
    if (auto it = pool.find(alpha); it != pool.end()) return it->second;
    p.alpha = alpha;
    // warm start from the nearest larger alpha already solved
    const BoundaryData* guess = nullptr;
    if (auto it = controls.upper_bound(alpha); it != controls.end()) guess = &it->second;
    auto sol = solve_control(k, p, guess);
    ScalarField ug = field_at(sol.g);
    for (std::size_t n = 0; n < ug.values().size(); ++n) ug[n] -= v[n];
    const Sample smp{l2_norm(ug, whole) / table.target_h1, sol.g_norm / table.target_h1};
    pool.emplace(alpha, smp);
    controls.emplace(alpha, std::move(sol.g));
    return smp;
  };

  const double zero_err = table.target_l2 / table.target_h1;
  for (double eps : eps_schedule) {
    if (zero_err <= eps) continue;
    double lo = std::log(alpha_min), hi = std::log(alpha_max);
    if (eval(alpha_max).err <= eps) continue;
    if (eval(alpha_min).err > eps) continue;
    for (int it = 0; it < bisection_steps; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (eval(std::exp(mid)).err <= eps)
        lo = mid;
      else
        hi = mid;
    }
  }

  for (double eps : eps_schedule) {
    CostRow row;
    row.eps = eps;
    if (zero_err <= eps) {
      table.rows.push_back(row);
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [alpha, smp] : pool)
      if (smp.err <= eps && smp.norm < best) {
        best = smp.norm;
        row.alpha = alpha;
      }
    row.reachable = std::isfinite(best);
    row.ratio = row.reachable ? best : std::numeric_limits<double>::quiet_NaN();
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace bcm
