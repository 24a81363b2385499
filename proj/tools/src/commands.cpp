#include "bcmlab/commands.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <bcm/boundary_control.hpp>
#include <bcm/cg.hpp>
#include <bcm/error.hpp>
#include <bcm/format.hpp>
#include <bcm/geometric_optics.hpp>
#include <bcm/reconstruction.hpp>
#include <bcm/stats.hpp>

#include "bcmlab/svg.hpp"

namespace bcmlab {

using bcm::BoundaryData;
using bcm::Complex;
using bcm::format;
using bcm::format_real;
using bcm::Point;

namespace {

double cos4(double z) {
  if (std::abs(z) >= 1) return 0.0;
  const double c = std::cos(std::numbers::pi * z / 2);
  return c * c * c * c;
}

bcm::Box bounding(const RegionSpec& r) {
  if (r.shape == RegionSpec::Shape::ball)
    return {r.center - Point{r.radius, r.radius}, r.center + Point{r.radius, r.radius}};
  return {r.lo, r.hi};
}

bcm::RegionPtr make_region(const bcm::GridPtr& g, const RegionSpec& r, bcm::RegionKind kind) {
  if (r.shape == RegionSpec::Shape::ball)
    return std::make_shared<const bcm::Region>(bcm::Region::ball(g, r.center, r.radius, kind));
  return std::make_shared<const bcm::Region>(bcm::Region::box(g, r.lo, r.hi, kind));
}

bcm::TimeGrid make_time(const ExperimentConfig& c) {
  if (c.steps) return bcm::TimeGrid(c.T, *c.steps);
  return bcm::TimeGrid::from_cfl(c.T, c.h, c.dim, c.cfl);
}

// CSV table collected in memory and written once.
class Csv {
 public:
  explicit Csv(std::string header) : text_(std::move(header) + "\n") {}
  template <class... Cells>
  void row(const Cells&... cells) {
    std::string line;
    ((line += cell(cells), line += ','), ...);
    line.back() = '\n';
    text_ += line;
  }
  void save(const std::filesystem::path& p) const {
    std::ofstream os(p, std::ios::binary);
    if (!os) bcm::fail_validation("cannot write " + p.string());
    os << text_;
  }

 private:
  static std::string cell(double v) { return format_real(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  std::string text_;
};

template <class Fn>
void save_stream(const std::filesystem::path& p, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  std::ofstream os(p, std::ios::binary);
  if (!os) bcm::fail_validation("cannot write " + p.string());
  os << ss.str();
}

struct Log {
  bool on = false;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  template <class... Args>
  void operator()(const char* fmt, Args... args) const {
    if (!on) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << format("[%7.1fs] ", s) << format(fmt, args...) << '\n';
  }
};

// Random smooth space-time data on omega: a few cos^4 bumps centred at
// omega nodes, active before `t_end`, with a random phase.
BoundaryData random_data(const Experiment& ex, std::mt19937_64& rng, double t_end) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto& om = *ex.omega();
  struct Bump {
    Point c;
    double r, tc, tw, a;
  };
  std::vector<Bump> bumps;
  for (int j = 0; j < 3; ++j) {
    Bump b;
    const auto idx = static_cast<std::size_t>(u01(rng) * static_cast<double>(om.size()));
    b.c = om.grid().position(om.nodes()[std::min(idx, om.size() - 1)]);
    b.r = 0.15 + 0.2 * u01(rng);
    b.tw = 0.15 + 0.25 * u01(rng);
    b.tc = b.tw + (t_end - 2 * b.tw) * u01(rng);
    b.a = 2 * u01(rng) - 1;
    bumps.push_back(b);
  }
  const Complex phase = std::polar(1.0, 2 * std::numbers::pi * u01(rng));
  return BoundaryData::sample(ex.omega(), ex.time(), [&](double t, Point x) {
    double v = 0;
    for (const auto& b : bumps) v += b.a * cos4((t - b.tc) / b.tw) * cos4(bcm::norm(x - b.c) / b.r);
    return phase * v;
  });
}

double rel_gap(Complex a, Complex b, double scale) { return scale > 0 ? std::abs(a - b) / scale : std::abs(a - b); }

// ------------------------------------------------------------------ forward

int cmd_forward(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto& cfg = ex.config();
  const auto map = ex.map(cfg.data);
  const auto f = ex.pulse();
  const int nt = ex.time().steps();
  const double cell = ex.grid()->cell_volume();

  bcm::SolveOptions so;
  so.storage = bcm::Storage::selected;
  if (cfg.storage == bcm::Storage::all) {
    for (int k = 0; k <= nt; ++k) so.stored_steps.push_back(k);
  } else if (cfg.storage == bcm::Storage::selected) {
    for (int i = 1; i <= 8; ++i) so.stored_steps.push_back(nt * i / 8);
  } else {
    so.stored_steps = {nt};
  }
  std::vector<double> l2(nt + 1), peak(nt + 1);
  so.on_step = [&](int k, std::span<const Complex> u) {
    double s = 0, m = 0;
    for (const auto& z : u) {
      s += std::norm(z);
      m = std::max(m, std::abs(z));
    }
    l2[k] = std::sqrt(s * cell);
    peak[k] = m;
  };
  log("forward solve, %d steps on %zu nodes", nt, ex.grid()->size());
  const auto res = map->solver().solve(f, so);

  Csv csv("step,time,l2_norm,max_abs");
  std::vector<double> ts;
  for (int k = 0; k <= nt; ++k) {
    csv.row(k, ex.time().time(k), l2[k], peak[k]);
    ts.push_back(ex.time().time(k));
  }
  csv.save(opt.out / "forward.csv");

  const auto& last = res.field.at(so.stored_steps.back());
  Csv prof("x,y,re,im");
  for (std::size_t n = 0; n < ex.grid()->size(); ++n) {
    const auto p = ex.grid()->position(n);
    prof.row(p.x, p.y, last[n].real(), last[n].imag());
  }
  prof.save(opt.out / "forward_profile.csv");
  for (int k : so.stored_steps)
    bcm::write_snapshot((opt.out / format("snapshot_%06d.bin", k)).string(), res.field.at(k), ex.time().dt());

  PlotSpec ps{"forward solve", "t", "||u(t)||_L2", false, false, {{"data potential " + cfg.data, ts, l2}}, {}};
  write_svg((opt.out / "forward.svg").string(), ps);
  return exit_ok;
}

// -------------------------------------------------------------- lambda-norm

int cmd_lambda_norm(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto& cfg = ex.config();
  bcm::PowerOptions po{cfg.power_iters, cfg.power_tol, cfg.seed};
  Csv csv("id,lambda_diff,q_diff_l2_k,iterations,converged");
  Series s{"||L1 - L2||", {}, {}, Series::Style::markers};
  bool all = true;
  for (const auto& p : cfg.potentials) {
    if (p.id == cfg.reference) continue;
    log("power iteration %s vs %s", cfg.reference.c_str(), p.id.c_str());
    const auto est = bcm::op_norm_diff(*ex.map(cfg.reference), *ex.map(p.id), po);
    const double dq = bcm::potential_difference(*ex.potential(cfg.reference), *ex.potential(p.id), *ex.k());
    csv.row(p.id, est.value, dq, est.iterations, est.converged);
    s.x.push_back(dq);
    s.y.push_back(est.value);
    all = all && est.converged;
  }
  csv.save(opt.out / "lambda_norm.csv");
  PlotSpec ps{"operator norm difference", "||q1 - q2||_L2(K)", "||L1 - L2||", false, false, {s}, {}};
  write_svg((opt.out / "lambda_norm.svg").string(), ps);
  if (!all) {
    std::cerr << "lambda-norm: power iteration did not converge for some rows\n";
    return exit_numerical;
  }
  return exit_ok;
}

// -------------------------------------------------------------- blago-check

struct IdentityRow {
  std::string potential, check;
  int pair = 0, step_a = 0, step_b = 0;
  Complex lhs, rhs;
  double rel = 0;
};

std::vector<IdentityRow> identity_rows(const Experiment& ex, int pairs, int translated, const Log& log) {
  const auto& cfg = ex.config();
  const int nt = ex.time().steps(), half = nt / 2;
  const auto whole = bcm::Region::whole(ex.grid());
  std::vector<IdentityRow> rows;
  for (const auto& p : cfg.potentials) {
    log("identities for %s", p.id.c_str());
    const auto map = ex.map(p.id);
    const bcm::ConnectingOperator kop(map);
    std::mt19937_64 rng(cfg.seed);
    for (int i = 0; i < pairs; ++i) {
      const auto f = random_data(ex, rng, 0.45 * cfg.T);
      const auto h = random_data(ex, rng, 0.45 * cfg.T);
      const double fh = bcm::data_norm(f) * bcm::data_norm(h);

      const auto lf = map->apply(f);
      const Complex a = bcm::data_inner(lf, h), b = bcm::data_inner(f, map->apply_adjoint(h));
      rows.push_back({p.id, "adjoint", i, 0, nt, a, b, rel_gap(a, b, bcm::data_norm(lf) * bcm::data_norm(h))});

      std::vector<int> steps{half};
      std::vector<std::pair<int, int>> tp;
      if (i < translated) {
        tp = {{half / 2, half / 2}, {3 * half / 5, 2 * half / 5}, {3 * half / 10, 4 * half / 5}, {half, 7 * half / 10},
              {9 * half / 10, half}};
        for (auto [x, y] : tp) steps.insert(steps.end(), {x, y});
        std::sort(steps.begin(), steps.end());
        steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
      }
      bcm::SolveOptions so;
      so.storage = bcm::Storage::selected;
      so.stored_steps = steps;
      const auto uf = map->solver().solve(f, so).field;
      const auto uh = map->solver().solve(h, so).field;

      const Complex bi = bcm::blago_inner(kop, f, h);
      const Complex di = bcm::l2_inner(uf.at(half), uh.at(half), whole);
      rows.push_back({p.id, "blagoveshchenskii", i, half, half, bi, di, rel_gap(bi, di, fh)});
      for (auto [x, y] : tp) {
        const Complex ti = bcm::inner_product_at_times(kop, f, h, x, y);
        const Complex td = bcm::l2_inner(uf.at(x), uh.at(y), whole);
        rows.push_back({p.id, "translated", i, x, y, ti, td, rel_gap(ti, td, fh)});
      }
    }
  }
  return rows;
}

constexpr double kIdentityTol = 1e-2;

int cmd_blago_check(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto rows = identity_rows(ex, ex.config().random_pairs, 1, log);
  Csv csv("potential,pair,check,step_a,step_b,lhs_re,lhs_im,rhs_re,rhs_im,rel_error,pass");
  std::map<std::string, Series> by_check;
  bool ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const bool pass = r.rel <= kIdentityTol;
    ok = ok && pass;
    csv.row(r.potential, r.pair, r.check, r.step_a, r.step_b, r.lhs.real(), r.lhs.imag(), r.rhs.real(), r.rhs.imag(),
            r.rel, pass);
    auto& s = by_check[r.check];
    s.label = r.check;
    s.style = Series::Style::markers;
    s.x.push_back(static_cast<double>(i));
    s.y.push_back(std::max(r.rel, 1e-18));
  }
  csv.save(opt.out / "blago_check.csv");
  PlotSpec ps{"identity residuals", "row", "relative residual", false, true, {}, {format("tolerance %g", kIdentityTol)}};
  for (auto& [k, s] : by_check) ps.series.push_back(std::move(s));
  write_svg((opt.out / "blago_check.svg").string(), ps);
  if (!ok) {
    std::cerr << "blago-check: identity residual above tolerance\n";
    return exit_numerical;
  }
  return exit_ok;
}

// ------------------------------------------------------------------ control

struct ControlRun {
  std::vector<bcm::ControlSolution> path;
  std::size_t knee = 0;
  double gamma_direct = 0;
  double ratio_max = 0;    // max alpha ||g|| / ||f||
  double ratio_bound = 0;  // ||K_t f|| / ||f||
};

ControlRun control_run(const Experiment& ex, const BoundaryData& f, int step, double s) {
  const auto& cfg = ex.config();
  const auto map = ex.map(cfg.data);
  const bcm::ConnectingOperator kop(map);
  bcm::ControlProblem p{f, step, s, cfg.alphas.front(), nullptr, cfg.max_iters};
  ControlRun r;
  r.path = bcm::solve_control_path(kop, p, cfg.alphas);
  r.knee = bcm::lcurve_knee(r.path);

  bcm::SolveOptions so;
  so.storage = bcm::Storage::selected;
  so.stored_steps = {step};
  const auto u = map->solver().solve(f, so).field.at(step);
  const auto m = bcm::control_target_region(p, *ex.omega());
  for (std::size_t n = 0; n < u.grid().size(); ++n)
    if (!m.contains(n)) r.gamma_direct += std::norm(u[n]);
  r.gamma_direct *= ex.grid()->cell_volume();

  const double fn = bcm::data_norm(f);
  for (const auto& c : r.path) r.ratio_max = std::max(r.ratio_max, c.alpha * c.g_norm / fn);
  r.ratio_bound = bcm::data_norm(kop.with_horizon(2 * step).apply(f)) / fn;
  return r;
}

int cmd_control(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto& cfg = ex.config();
  const int step = ex.time().step_of(cfg.eval_time);
  log("control path over %zu alphas at t = %g, s = %g", cfg.alphas.size(), cfg.eval_time, cfg.influence);
  const auto r = control_run(ex, ex.pulse(), step, cfg.influence);
  save_stream(opt.out / "control.csv", [&](std::ostream& os) { bcm::write_control_csv(os, r.path); });

  const auto& kn = r.path[r.knee];
  const double rel = std::abs(kn.gamma_hat - r.gamma_direct) / std::max(r.gamma_direct, 1e-300);
  Csv sum("eval_time,influence,knee_alpha,gamma_hat,gamma_direct,gamma_rel_error,alpha_g_over_f_max,alpha_g_over_f_bound,"
          "knee_converged");
  sum.row(cfg.eval_time, cfg.influence, kn.alpha, kn.gamma_hat, r.gamma_direct, rel, r.ratio_max, r.ratio_bound,
          kn.converged);
  sum.save(opt.out / "control_summary.csv");

  Series lc{"L-curve", {}, {}, Series::Style::markers_line};
  for (const auto& c : r.path) {
    lc.x.push_back(c.g_norm);
    lc.y.push_back(c.misfit);
  }
  Series knee{"knee", {kn.g_norm}, {kn.misfit}, Series::Style::markers};
  PlotSpec ps{"Tikhonov control L-curve", "||g_alpha||", "misfit A(g_alpha)", true, true, {lc, knee},
              {format("knee alpha %g: Gamma_hat %.4g, direct %.4g", kn.alpha, kn.gamma_hat, r.gamma_direct)}};
  write_svg((opt.out / "control.svg").string(), ps);
  if (!kn.converged) {
    std::cerr << "control: CG did not converge at the knee\n";
    return exit_numerical;
  }
  return exit_ok;
}

// --------------------------------------------------------------------- cost

int cmd_cost(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto& cfg = ex.config();
  const bcm::ConnectingOperator kop(ex.map(cfg.data));
  const int step = ex.time().step_of(cfg.eval_time);
  log("cost of control over %zu eps values", cfg.eps.size());
  const auto [amin, amax] = std::minmax_element(cfg.alphas.begin(), cfg.alphas.end());
  const auto table = bcm::cost_of_control_estimate(kop, ex.pulse(), step, cfg.influence, cfg.eps, *amin, *amax);
  save_stream(opt.out / "cost.csv", [&](std::ostream& os) { bcm::write_cost_csv(os, table); });
  Series s{"A_hat(eps)", {}, {}, Series::Style::markers_line};
  bool any = false;
  for (const auto& r : table.rows)
    if (r.reachable) {
      s.x.push_back(r.eps);
      s.y.push_back(r.ratio);
      any = true;
    }
  if (!any) {
    std::cerr << "cost: no eps in the schedule was reachable\n";
    return exit_numerical;
  }
  PlotSpec ps{"cost of control", "eps", "||g|| / ||u^f(t)||_H1(M)", true, true, {s}, {}};
  write_svg((opt.out / "cost.svg").string(), ps);
  return exit_ok;
}

// ----------------------------------------------------------------- go-check

bcm::ProbeParams probe_params(const Experiment& ex, int order) {
  const auto& cfg = ex.config();
  bcm::ProbeParams p;
  p.x0 = cfg.x0 ? *cfg.x0 : 0.5 * (cfg.k.lo + cfg.k.hi);
  p.order = order;
  p.delta = cfg.delta;
  p.eta = cfg.eta;
  return p;
}

int cmd_go_check(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto& cfg = ex.config();
  const auto map = ex.map(cfg.data);
  std::vector<int> orders{0};
  if (cfg.order != 0) orders.push_back(cfg.order);

  PlotSpec ps{"geometric optics remainder", "sigma", "||u^h - (1 - chi) V||_L2", true, true, {}, {}};
  Csv sum("order,slope,fitted,h2_slope");
  bool ok = true;
  for (int n : orders) {
    log("remainder sweep, order %d", n);
    const auto rep = bcm::remainder_check(*map, probe_params(ex, n), cfg.sigmas);
    save_stream(opt.out / format("decay_order%d.csv", n), [&](std::ostream& os) { bcm::write_decay_csv(os, rep); });
    sum.row(n, rep.slope, rep.fitted, rep.h2_slope);
    Series s{format("N = %d", n), {}, {}, Series::Style::markers};
    for (const auto& r : rep.rows) {
      s.x.push_back(r.sigma);
      s.y.push_back(r.l2_remainder);
    }
    ps.series.push_back(s);
    if (rep.fitted >= 2 && std::isfinite(rep.slope)) {
      // Fitted line through the geometric mean of the fitted rows.
      double lx = 0, ly = 0;
      std::vector<double> xs;
      for (const auto& r : rep.rows)
        if (!r.ppw_flag && r.l2_remainder > 0) {
          lx += std::log(r.sigma);
          ly += std::log(r.l2_remainder);
          xs.push_back(r.sigma);
        }
      lx /= static_cast<double>(xs.size());
      ly /= static_cast<double>(xs.size());
      Series fit{format("fit N = %d", n), {}, {}, Series::Style::line};
      for (double x : {*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end())}) {
        fit.x.push_back(x);
        fit.y.push_back(std::exp(ly + rep.slope * (std::log(x) - lx)));
      }
      ps.series.push_back(fit);
      ps.notes.push_back(format("N = %d: slope %.3f over %d sigmas", n, rep.slope, rep.fitted));
    } else {
      ok = false;
      ps.notes.push_back(format("N = %d: fewer than two sigmas pass the wavelength guard", n));
    }
  }
  sum.save(opt.out / "go_summary.csv");

  log("probe lower bound");
  const auto lb = bcm::probe_lower_bound(*map, probe_params(ex, cfg.order), cfg.sigmas);
  Csv lbc("sigma,probe_value");
  for (auto [s, v] : lb.values) lbc.row(s, v);
  lbc.save(opt.out / "lower_bound.csv");
  Csv lbs("sigma0,margin,achieved");
  lbs.row(lb.sigma0, lb.margin, lb.achieved);
  lbs.save(opt.out / "lower_bound_summary.csv");
  write_svg((opt.out / "go_check.svg").string(), ps);
  if (!lb.achieved) {
    std::cerr << "go-check: probe lower bound not reached on the sigma schedule\n";
    ok = false;
  }
  return ok ? exit_ok : exit_numerical;
}

// -------------------------------------------------------------- reconstruct

bcm::ReconstructionConfig recon_config(const Experiment& ex) {
  const auto& cfg = ex.config();
  bcm::ReconstructionConfig rc;
  rc.reference = ex.map(cfg.reference);
  rc.data = ex.map(cfg.data);
  rc.target = ex.k();
  rc.probe = {{0, 0}, 0, 0, cfg.f_delta, cfg.f_eta};
  rc.point_probe = {{0, 0}, cfg.sigmas.back(), cfg.order, cfg.delta, cfg.eta};
  rc.mode = cfg.mode;
  rc.stride = cfg.stride;
  rc.time_spacing = cfg.time_spacing;
  rc.cap_eta = cfg.cap_eta;
  rc.ball_r = cfg.ball_r;
  rc.alpha = cfg.recon_alpha;
  rc.guard_tol = cfg.guard_tol;
  rc.max_reject_fraction = cfg.max_reject;
  rc.truth = ex.potential(cfg.data);
  return rc;
}

int cmd_reconstruct(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto& cfg = ex.config();
  log("reconstruction of %s against %s", cfg.data.c_str(), cfg.reference.c_str());
  const auto r = bcm::reconstruct_potential(recon_config(ex));
  save_stream(opt.out / "reconstruction.csv", [&](std::ostream& os) { bcm::write_reconstruction_csv(os, r); });

  Csv smp("x,y,step,ray,u1,d_hat,d_direct,divisor,cg_iterations,cg_residual,converged");
  for (const auto& s : r.samples)
    smp.row(s.x.x, s.x.y, s.step, s.ray, s.u1, s.d_hat, s.d_direct, s.divisor, s.iterations, s.residual, s.converged);
  smp.save(opt.out / "reconstruction_samples.csv");

  Csv sum("accepted_fraction,abs_error,rel_error,d_error,max_cg_residual,cg_iterations,probe_margin");
  sum.row(r.accepted_fraction, r.abs_error, r.rel_error, r.d_error, r.max_residual, r.cg_iterations, r.probe_margin);
  sum.save(opt.out / "reconstruction_summary.csv");

  Series qh{"q_hat", {}, {}, Series::Style::markers_line}, qt{"q2 (truth)", {}, {}, Series::Style::line},
      q1{"q1", {}, {}, Series::Style::line};
  for (const auto& n : r.nodes) {
    if (n.accepted) {
      qh.x.push_back(n.x.x);
      qh.y.push_back(n.q_hat);
    }
    qt.x.push_back(n.x.x);
    qt.y.push_back(n.q_true);
    q1.x.push_back(n.x.x);
    q1.y.push_back(n.q_ref);
  }
  PlotSpec ps{"reconstructed potential on K", "x", "q", false, false, {qh, qt, q1},
              {format("relative L2(K) error %.4f, accepted %.3f", r.rel_error, r.accepted_fraction)}};
  write_svg((opt.out / "reconstruction.svg").string(), ps);
  return exit_ok;
}

// -------------------------------------------------------------------- sweep

int cmd_sweep(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto& cfg = ex.config();
  std::vector<bcm::PotentialPair> pairs;
  for (const auto& [a, b] : cfg.pairs) pairs.push_back({b, ex.potential(a), ex.potential(b)});
  bcm::SweepConfig sc;
  sc.omega = ex.omega();
  sc.target = ex.k();
  sc.time = ex.time();
  sc.recon = recon_config(ex);
  sc.reconstruct = cfg.sweep_reconstruct;
  sc.power = {cfg.power_iters, cfg.power_tol, cfg.seed};
  sc.eps_schedule = cfg.eps;
  log("stability sweep over %zu pairs", pairs.size());
  const auto rep = bcm::stability_sweep(pairs, sc);

  save_stream(opt.out / "sweep.csv", [&](std::ostream& os) { bcm::write_sweep_csv(os, rep); });
  save_stream(opt.out / "cost.csv", [&](std::ostream& os) { bcm::write_cost_csv(os, rep.table); });

  Csv fit("pair_id,lambda_diff,q_diff_l2_k,log_residual");
  std::size_t j = 0;
  for (const auto& r : rep.rows) {
    if (!r.ok) continue;
    const double res = j < rep.fit.residuals.size() ? rep.fit.residuals[j] : std::numeric_limits<double>::quiet_NaN();
    ++j;
    fit.row(r.id, r.lambda_diff, r.q_diff, res);
  }
  fit.save(opt.out / "sweep_fit.csv");

  Csv sum("pairs,failed,spearman,table_monotone,fit_c,fit_alpha,fit_rms,fit_points,ell,ell_rms");
  const auto failed = static_cast<std::size_t>(std::count_if(rep.rows.begin(), rep.rows.end(), [](auto& r) { return !r.ok; }));
  sum.row(rep.rows.size(), failed, rep.spearman, rep.table_monotone, rep.fit.c, rep.fit.alpha, rep.fit.rms, rep.fit.points,
          rep.ell, rep.ell_rms);
  sum.save(opt.out / "sweep_summary.csv");

  Series pts{"pairs", {}, {}, Series::Style::markers};
  for (const auto& r : rep.rows)
    if (r.ok) {
      pts.x.push_back(r.lambda_diff);
      pts.y.push_back(r.q_diff);
    }
  PlotSpec ps{"stability sweep", "||L1 - L2||", "||q1 - q2||_L2(K)", true, true, {pts},
              {format("Spearman %.3f", rep.spearman)}};
  if (rep.fit.points >= 2 && pts.x.size() >= 2) {
    Series model{"C / (log|log d|)^a", {}, {}, Series::Style::line};
    const double lo = *std::min_element(pts.x.begin(), pts.x.end());
    const double hi = std::min(*std::max_element(pts.x.begin(), pts.x.end()), 0.999 / std::numbers::e);
    for (int i = 0; i <= 40 && lo < hi; ++i) {
      const double d = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / 40.0);
      model.x.push_back(d);
      model.y.push_back(rep.fit.c / std::pow(std::log(std::abs(std::log(d))), rep.fit.alpha));
    }
    ps.series.push_back(model);
    ps.notes.push_back(format("fit C %.3g, alpha %.3g, rms %.3g", rep.fit.c, rep.fit.alpha, rep.fit.rms));
  }
  write_svg((opt.out / "sweep.svg").string(), ps);
  if (failed > 0) {
    for (const auto& r : rep.rows)
      if (!r.ok) std::cerr << "sweep: row " << r.id << " failed: " << r.note << '\n';
    return exit_numerical;
  }
  return exit_ok;
}

// -------------------------------------------------------------------- check

int cmd_check(const Experiment& ex, const RunOptions& opt, const Log& log) {
  const auto rows = invariant_suite(ex, log.on);
  Csv csv("invariant,value,threshold,status");
  Series s{"value / threshold", {}, {}, Series::Style::markers};
  bool ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv.row(r.name, r.value, r.threshold, std::string(r.pass ? "pass" : "fail"));
    ok = ok && r.pass;
    s.x.push_back(static_cast<double>(i));
    s.y.push_back(r.threshold > 0 ? std::max(std::abs(r.value) / r.threshold, 1e-18) : std::max(std::abs(r.value), 1e-18));
  }
  csv.save(opt.out / "check.csv");
  PlotSpec ps{"invariant suite", "row", "|value| / threshold", false, true, {s}, {}};
  write_svg((opt.out / "check.svg").string(), ps);
  if (!ok) {
    for (const auto& r : rows)
      if (!r.pass) std::cerr << "check: " << r.name << " failed (" << r.value << " vs " << r.threshold << ")\n";
    return exit_numerical;
  }
  return exit_ok;
}

}  // namespace

// --------------------------------------------------------------- Experiment

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)), time_(make_time(cfg_)) {
  time_.check_cfl(cfg_.h, cfg_.dim);
  const auto kb = bounding(cfg_.k), ob = bounding(cfg_.omega);
  if (cfg_.padding) {
    const Point pad{*cfg_.padding, cfg_.dim > 1 ? *cfg_.padding : 0.0};
    const Point lo{std::min(kb.lo.x, ob.lo.x), std::min(kb.lo.y, ob.lo.y)};
    const Point hi{std::max(kb.hi.x, ob.hi.x), std::max(kb.hi.y, ob.hi.y)};
    grid_ = std::make_shared<const bcm::SpatialGrid>(bcm::SpatialGrid::covering(cfg_.dim, lo - pad, hi + pad, cfg_.h));
  } else {
    grid_ = std::make_shared<const bcm::SpatialGrid>(bcm::padded_box(cfg_.dim, kb, ob, time_, cfg_.h));
  }
  omega_ = make_region(grid_, cfg_.omega, bcm::RegionKind::omega);
  k_ = make_region(grid_, cfg_.k, bcm::RegionKind::target_k);
  bcm::require(!omega_->empty(), "geometry.omega contains no grid node");
  bcm::require(!k_->empty(), "geometry.k contains no grid node");
  for (const auto& p : cfg_.potentials) {
    auto q = bcm::Potential::from_bumps(grid_, p.bumps);
    if (p.bound) q.set_bound(*p.bound, p.smoothness);
    potentials_[p.id] = std::make_shared<const bcm::Potential>(std::move(q));
  }
}

bcm::PotentialPtr Experiment::potential(const std::string& id) const {
  auto it = potentials_.find(id);
  if (it == potentials_.end()) bcm::fail_validation("unknown potential id '" + id + "'");
  return it->second;
}

bcm::MapPtr Experiment::map(const std::string& id) const {
  auto it = maps_.find(id);
  if (it != maps_.end()) return it->second;
  auto m = std::make_shared<const bcm::SourceToSolutionMap>(potential(id), omega_, time_);
  maps_[id] = m;
  return m;
}

double Experiment::pulse_value(double t, Point x) const {
  const auto& s = cfg_.source;
  return cos4((t - s.t_center) / s.t_width) * cos4(bcm::norm(x - s.center) / s.radius);
}

BoundaryData Experiment::pulse() const {
  return BoundaryData::sample(omega_, time_, [&](double t, Point x) { return Complex(pulse_value(t, x)); });
}

// ----------------------------------------------------------- invariant suite

std::vector<CheckRow> invariant_suite(const Experiment& ex, bool verbose) {
  const Log log{verbose};
  const auto& cfg = ex.config();
  const auto& grid = *ex.grid();
  const auto& time = ex.time();
  const int nt = time.steps();
  const auto f = ex.pulse();
  std::vector<CheckRow> rows;
  auto add = [&](std::string name, double v, double thr, bool pass) { rows.push_back({std::move(name), v, thr, pass}); };

  // Solver against d'Alembert with q = 0.
  if (cfg.dim == 1) {
    log("d'Alembert oracle");
    auto q0 = std::make_shared<const bcm::Potential>(ex.grid());
    bcm::WaveSolver solver(q0, time);
    const int k = nt / 2;
    bcm::SolveOptions so;
    so.storage = bcm::Storage::selected;
    so.stored_steps = {k};
    const auto u = solver.solve(f, so).field.at(k);
    const auto& s = cfg.source;
    // The source is restricted to omega nodes, so the oracle integrates over omega only.
    const auto ob = bounding(cfg.omega);
    bcm::OracleQuadrature quad{std::max(0.0, s.t_center - s.t_width), s.t_center + s.t_width,
                               std::max(ob.lo.x, s.center.x - s.radius), std::min(ob.hi.x, s.center.x + s.radius)};
    const auto ref = bcm::dalembert_oracle_1d([&](double t, double x) { return ex.pulse_value(t, {x, 0}); },
                                              ex.grid(), time.time(k), quad);
    double e2 = 0, r2 = 0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
      e2 += std::norm(u[n] - ref[n]);
      r2 += std::norm(ref[n]);
    }
    const double rel = std::sqrt(e2 / r2);
    add("solver_vs_dalembert_rel_l2", rel, 1e-2, rel <= 1e-2);
  }

  // Finite speed and outer layers, every step, data potential.
  {
    log("finite speed");
    const auto map = ex.map(cfg.data);
    const auto dist = bcm::distance_field(*ex.omega());
    const double h = grid.spacing();
    std::vector<std::uint8_t> outer(grid.size(), 0);
    for (std::size_t n = 0; n < grid.size(); ++n) {
      const auto c = grid.coords(n);
      for (int ax = 0; ax < grid.dim(); ++ax)
        if (c[ax] < 2 || c[ax] > grid.count(ax) - 3) outer[n] = 1;
    }
    double leak = 0, edge = 0;
    bcm::SolveOptions so;
    so.on_step = [&](int k, std::span<const Complex> u) {
      const double reach = (k + 2) * h;
      for (std::size_t n = 0; n < u.size(); ++n) {
        if (dist[n] > reach) leak = std::max(leak, std::abs(u[n]));
        if (outer[n]) edge = std::max(edge, std::abs(u[n]));
      }
    };
    map->solver().solve(f, so);
    add("finite_speed_max_outside_cone", leak, 0.0, leak == 0.0);
    add("outer_layers_max", edge, 0.0, edge == 0.0);
  }

  // Energy after the source switches off.
  {
    log("energy");
    const auto map = ex.map(cfg.data);
    const int k1 = std::min(nt - 2, static_cast<int>(std::ceil((cfg.source.t_center + cfg.source.t_width) / time.dt())) + 2);
    bcm::SolveOptions so;
    so.storage = bcm::Storage::selected;
    so.stored_steps = {k1, k1 + 1, nt - 1, nt};
    const auto u = map->solver().solve(f, so).field;
    const double e0 = bcm::energy(u, map->potential(), k1), e1 = bcm::energy(u, map->potential(), nt - 1);
    const double drift = std::abs(e1 - e0) / std::abs(e0);
    add("energy_drift_after_source", drift, 1e-10, drift <= 1e-10);
  }

  // Adjoint and Blagoveshchenskii identities, three random pairs per potential.
  {
    const auto id = identity_rows(ex, 3, 1, log);
    double adj = 0, bl = 0, tr = 0;
    for (const auto& r : id) {
      if (r.check == "adjoint") adj = std::max(adj, r.rel);
      else if (r.check == "translated") tr = std::max(tr, r.rel);
      else bl = std::max(bl, r.rel);
    }
    add("adjoint_identity_max_rel", adj, 1e-10, adj <= 1e-10);
    add("blagoveshchenskii_identity_max_rel", bl, 1e-10, bl <= 1e-10);
    add("translated_identity_max_rel", tr, 1e-10, tr <= 1e-10);
  }

  // K on a coarse dense basis: positivity and CG against a direct solve.
  {
    log("dense connecting operator");
    const bcm::ConnectingOperator kop(ex.map(cfg.data));
    const bcm::CoarseBasis basis(ex.omega(), time, 16, cfg.dim == 1 ? 6 : 4, 0, kop.half() - 1);
    const auto dense = bcm::assemble_dense([&](const BoundaryData& x) { return kop.apply(x); }, basis);
    const Eigen::MatrixXcd m = 0.5 * (dense.matrix + dense.matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    const double knorm = eig.eigenvalues().cwiseAbs().maxCoeff();
    add("k_min_eigenvalue_over_norm", lmin / knorm, -1e-6, lmin >= -1e-6 * knorm);

    const Eigen::VectorXcd x = dense.coordinates(basis, f);
    double worst = 0;
    for (double alpha : {1e-2, 1e-3}) {
      const double a = alpha * knorm;
      const Eigen::MatrixXcd sys = m + a * Eigen::MatrixXcd::Identity(m.rows(), m.cols());
      const Eigen::VectorXcd b = m * x;
      const Eigen::VectorXcd direct = sys.ldlt().solve(b);
      Eigen::VectorXcd g = Eigen::VectorXcd::Zero(b.size());
      bcm::conjugate_gradient([&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(sys * v); }, b, g,
                              [](const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) { return v.dot(u); }, 1e-14,
                              10 * static_cast<int>(b.size()));
      worst = std::max(worst, (g - direct).norm() / direct.norm());
    }
    add("cg_vs_dense_direct_rel", worst, 1e-6, worst <= 1e-6);
  }

  // Control: Gamma at the L-curve knee against the direct indicator.
  {
    log("control path");
    const int step = time.step_of(cfg.eval_time);
    const auto r = control_run(ex, f, step, cfg.influence);
    const auto& kn = r.path[r.knee];
    const double rel = std::abs(kn.gamma_hat - r.gamma_direct) / std::max(r.gamma_direct, 1e-300);
    add("control_gamma_rel_error_at_knee", rel, 0.1, rel <= 0.1);
    add("control_alpha_g_over_f_max", r.ratio_max, r.ratio_bound, r.ratio_max <= r.ratio_bound * (1 + 1e-9));
  }

  // Geometric optics probe reaches |u^h(s_delta, x0)| >= 1/2.
  {
    log("probe lower bound");
    auto p = probe_params(ex, cfg.order);
    const auto lb = bcm::probe_lower_bound(*ex.map(cfg.data), p, cfg.sigmas);
    add("probe_lower_bound_margin", lb.margin, 0.1, lb.achieved && lb.margin >= 0.1);
  }
  return rows;
}

// ------------------------------------------------------------------ dispatch

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"forward", "lambda-norm", "blago-check", "control", "cost",
                                              "go-check", "reconstruct", "sweep", "check"};
  return names;
}

int run_command(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opt) {
  const Log log{opt.verbose};
  try {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
      bcm::fail_validation("unknown subcommand '" + name + "'");
    std::filesystem::create_directories(opt.out);
    const Experiment ex(cfg);
    log("grid %zu nodes, %d steps, dt %g", ex.grid()->size(), ex.time().steps(), ex.time().dt());
    if (name == "forward") return cmd_forward(ex, opt, log);
    if (name == "lambda-norm") return cmd_lambda_norm(ex, opt, log);
    if (name == "blago-check") return cmd_blago_check(ex, opt, log);
    if (name == "control") return cmd_control(ex, opt, log);
    if (name == "cost") return cmd_cost(ex, opt, log);
    if (name == "go-check") return cmd_go_check(ex, opt, log);
    if (name == "reconstruct") return cmd_reconstruct(ex, opt, log);
    if (name == "sweep") return cmd_sweep(ex, opt, log);
    return cmd_check(ex, opt, log);
  } catch (const bcm::Error& e) {
    std::cerr << "bcmlab " << name << ": " << e.what() << '\n';
    return e.kind() == bcm::ErrorKind::validation ? exit_validation : exit_numerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "bcmlab " << name << ": " << e.what() << '\n';
    return exit_validation;
  }
}

}  // namespace bcmlab
