#include "bcm/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <ostream>
#include <tuple>

#include "bcm/error.hpp"
#include "bcm/format.hpp"

namespace bcm {

namespace {

void check_maps(const ReconstructionConfig& cfg) {
  require(cfg.reference && cfg.data && cfg.target, "reconstruction needs reference and data maps and a target region");
  require(cfg.reference->potential().grid() == cfg.data->potential().grid(), "reference and data maps live on different grids");
  require(cfg.reference->time() == cfg.data->time(), "reference and data maps use different time grids");
  require(cfg.reference->omega()->mask() == cfg.data->omega()->mask(), "reference and data maps observe different omega");
  require(cfg.target->grid() == cfg.reference->potential().grid(), "target region grid mismatch");
  require(cfg.stride >= 1 && cfg.time_spacing >= 1, "stencil spacings must be positive");
  require(cfg.cap_eta > 0 && cfg.ball_r > 0 && cfg.alpha > 0, "cap radius, ball radius and alpha must be positive");
  const double L = max_distance(*cfg.target, *cfg.reference->omega());
  const double T = cfg.reference->time().horizon();
  if (!(T > 2.0 * L))
    fail_validation(format("T = %g must exceed 2 L(K, omega) = %g", T, 2.0 * L));
}

ConnectingOperator data_operator(const MapPtr& m) {
  const int nt = m->time().steps();
  return ConnectingOperator(m, nt - nt % 2);
}

// Mean of |u|^2 over the cap nodes, rooted.
double cap_rms(const ScalarField& u, const CapRegion& cap) {
  double s = 0;
  for (std::size_t n : cap.cap->nodes()) s += std::norm(u[n]);
  return std::sqrt(s / static_cast<double>(cap.cap->size()));
}

template <class F>
void parallel_for(std::size_t n, F&& fn) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

SpaceTimeField solve_steps(const PotentialPtr& q, const TimeGrid& time, const BoundaryData& f, std::vector<int> steps) {
  WaveSolver solver(q, time);
  SolveOptions opt;
  opt.storage = Storage::selected;
  opt.horizon = std::max(1, *std::max_element(steps.begin(), steps.end()));
  opt.stored_steps = std::move(steps);
  return std::move(solver.solve(f, opt).field);
}

}  // namespace

std::vector<RayProbe> plan_rays(const ReconstructionConfig& cfg, std::vector<std::size_t>& targets,
                                std::vector<int>& ray_of) {
  check_maps(cfg);
  const auto& g = cfg.target->grid();
  const auto& omega = *cfg.reference->omega();
  const double h = g.spacing();
  const auto bb = cfg.target->bounding_box();
  targets.clear();
  for (std::size_t n : cfg.target->nodes()) {
    const auto [i, j] = g.coords(n);
    if ((i - bb[0]) % cfg.stride == 0 && (j - bb[2]) % cfg.stride == 0) targets.push_back(n);
  }
  require(!targets.empty(), "target region has no nodes on the stencil grid");

  // Rays keyed by boundary node and transverse offset.
  std::map<std::pair<std::size_t, long>, int> key_to_ray;
  std::vector<std::pair<std::size_t, double>> far;  // farthest node per ray
  ray_of.assign(targets.size(), 0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Point x = g.position(targets[t]);
    const BoundaryFrame fr = boundary_frame(x, omega);
    const Point d = x - fr.y;
    const long off = g.dim() == 2 ? std::lround((d.x * fr.normal.y - d.y * fr.normal.x) / h) : 0;
    auto [it, fresh] = key_to_ray.try_emplace({fr.node, off}, static_cast<int>(far.size()));
    if (fresh) far.emplace_back(targets[t], fr.distance);
    auto& best = far[it->second];
    if (fr.distance > best.second) best = {targets[t], fr.distance};
    ray_of[t] = it->second;
  }

  std::vector<RayProbe> rays;
  for (const auto& [node, dist] : far) {
    ProbeParams p = cfg.probe;
    p.x0 = g.position(node);
    GOProbe probe(*cfg.reference, p);
    rays.push_back({probe.params(), build_source(probe), probe.s_delta(), probe.normal()});
  }
  return rays;
}

std::vector<DifferenceSample> recover_difference_field(const ReconstructionConfig& cfg,
                                                       const std::vector<RayProbe>& rays,
                                                       const std::vector<SampleRequest>& requests) {
  check_maps(cfg);
  const auto& g = cfg.reference->potential().grid();
  const TimeGrid& time = cfg.reference->time();
  const RegionPtr& omega = cfg.reference->omega();
  const int half = time.steps() / 2;
  for (const auto& rq : requests) {
    require(rq.ray >= 0 && static_cast<std::size_t>(rq.ray) < rays.size(), "sample request names an unknown ray");
    if (rq.step < 1 || rq.step > half)
      fail_validation(format("evaluation step %d lies outside (0, T/2]; increase T", rq.step));
  }

  // Direct fields for the reference (and the oracle when the truth is known).
  std::vector<SpaceTimeField> u1, u2;
  for (std::size_t r = 0; r < rays.size(); ++r) {
    std::vector<int> steps;
    for (const auto& rq : requests)
      if (rq.ray == static_cast<int>(r)) steps.push_back(rq.step);
    if (steps.empty()) steps.push_back(1);
    u1.push_back(solve_steps(cfg.reference->potential_ptr(), time, rays[r].source, steps));
    if (cfg.truth) u2.push_back(solve_steps(cfg.truth, time, rays[r].source, steps));
  }

  std::map<std::size_t, CapRegion> caps;
  for (const auto& rq : requests)
    if (!caps.count(rq.node)) caps.emplace(rq.node, cap_build(g.position(rq.node), omega, cfg.ball_r, cfg.cap_eta));

  const ConnectingOperator k2 = data_operator(cfg.data);
  std::vector<DifferenceSample> out(requests.size());
  parallel_for(requests.size(), [&](std::size_t i) {
    const auto& rq = requests[i];
    const CapRegion& cap = caps.at(rq.node);
    const RayProbe& ray = rays[rq.ray];
    DifferenceSample& s = out[i];
    s.x = g.position(rq.node);
    s.node = rq.node;
    s.step = rq.step;
    s.ray = rq.ray;
    const ScalarField& f1 = u1[rq.ray].at(rq.step);
    CapDiagnostics diag;
    if (cfg.mode == RecoveryMode::self_modulus) {
      const Complex p = cap_average(k2, cap, ray.source, ray.source, rq.step, rq.step, cfg.alpha, &diag);
      const double U1 = cap_rms(f1, cap);
      const double U2 = std::sqrt(std::max(p.real(), 0.0));
      s.u1 = U1;
      s.d_hat = U1 - U2;
    } else {
      ProbeParams pp = cfg.point_probe;
      pp.x0 = s.x;
      GOProbe probe(*cfg.reference, pp);
      const BoundaryData hsrc = build_source(probe);
      const int tp = static_cast<int>(std::lround(probe.s_delta() / time.dt()));
      if (tp < 1 || tp > half) fail_validation(format("probe time step %d lies outside (0, T/2]; increase T", tp));
      const Complex a2 = cap_average(k2, cap, ray.source, hsrc, rq.step, tp, cfg.alpha, &diag);
      const auto h1 = solve_steps(cfg.reference->potential_ptr(), time, hsrc, {tp});
      AnsatzStream st(probe, tp);
      for (int k = 0; k <= tp; ++k) st.advance();
      const auto& oc = probe.outer_cutoff();
      Complex a1{}, vbar{};
      for (std::size_t n : cap.cap->nodes()) {
        a1 += f1[n] * std::conj(h1.at(tp)[n]);
        vbar += (1.0 - oc.value(g.position(n))) * st.field()[n];
      }
      const double cnt = static_cast<double>(cap.cap->size());
      a1 /= cnt;
      vbar /= cnt;
      if (std::abs(vbar) < 0.5 - cfg.guard_tol)
        fail_numerical(format("probe ansatz at node x = %g is below the guard; adjust the point probe", s.x.x));
      s.u1 = (a1 / std::conj(vbar)).real();
      s.d_hat = ((a1 - a2) / std::conj(vbar)).real();
    }
    s.divisor = s.u1 - s.d_hat;
    s.iterations = diag.iterations;
    s.residual = diag.residual;
    s.converged = diag.converged;
    if (cfg.truth) s.d_direct = (f1[rq.node] - u2[rq.ray].at(rq.step)[rq.node]).real();
  });
  return out;
}

ReconstructionResult reconstruct_potential(const ReconstructionConfig& cfg) {
  std::vector<std::size_t> targets;
  std::vector<int> ray_of;
  const auto rays = plan_rays(cfg, targets, ray_of);
  const auto& g = cfg.reference->potential().grid();
  const double dt = cfg.reference->time().dt();
  const double h = g.spacing();
  const int ts = cfg.time_spacing, sx = cfg.stride;

  auto eval_step = [&](std::size_t t) {
    const Point x = g.position(targets[t]);
    const RayProbe& ray = rays[ray_of[t]];
    const double tx = ray.s_delta + dot(x - ray.params.x0, ray.normal);
    return static_cast<int>(std::lround(tx / dt));
  };
  auto neighbour = [&](std::size_t node, int axis, int dir) {
    auto [i, j] = g.coords(node);
    (axis == 0 ? i : j) += dir * sx;
    require(i >= 0 && i < g.count(0) && j >= 0 && j < g.count(1), "difference stencil leaves the grid");
    return g.index(i, j);
  };

  std::map<std::tuple<int, std::size_t, int>, std::size_t> index;
  std::vector<SampleRequest> requests;
  auto want = [&](int ray, std::size_t node, int step) {
    auto [it, fresh] = index.try_emplace({ray, node, step}, requests.size());
    if (fresh) requests.push_back({node, step, ray});
    return it->second;
  };
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const int k = eval_step(t);
    for (int m = -2; m <= 2; ++m) want(ray_of[t], targets[t], k + m * ts);
    for (int axis = 0; axis < g.dim(); ++axis)
      for (int dir : {-1, 1})
        for (int m = -1; m <= 1; ++m) want(ray_of[t], neighbour(targets[t], axis, dir), k + m * ts);
  }

  ReconstructionResult res;
  res.samples = recover_difference_field(cfg, rays, requests);
  auto sample = [&](int ray, std::size_t node, int step) -> const DifferenceSample& {
    return res.samples[index.at({ray, node, step})];
  };

  const auto& q1 = cfg.reference->potential();
  const double guard = 0.5 - cfg.guard_tol;
  const double it2 = 1.0 / ((ts * dt) * (ts * dt)), ix2 = 1.0 / ((sx * h) * (sx * h));
  int accepted = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    ReconstructionNode nd;
    nd.node = targets[t];
    nd.x = g.position(nd.node);
    nd.q_ref = q1[nd.node];
    if (cfg.truth) nd.q_true = (*cfg.truth)[nd.node];
    const int r = ray_of[t];
    const int k = eval_step(t);
    nd.divisor = std::numeric_limits<double>::infinity();
    double acc = 0;
    for (int m = -1; m <= 1; ++m) {
      const int kk = k + m * ts;
      const auto& c = sample(r, nd.node, kk);
      double box = (sample(r, nd.node, kk + ts).d_hat - 2.0 * c.d_hat + sample(r, nd.node, kk - ts).d_hat) * it2;
      for (int axis = 0; axis < g.dim(); ++axis)
        box -= (sample(r, neighbour(nd.node, axis, 1), kk).d_hat - 2.0 * c.d_hat +
                sample(r, neighbour(nd.node, axis, -1), kk).d_hat) *
               ix2;
      nd.divisor = std::min(nd.divisor, std::abs(c.divisor));
      acc += (box + nd.q_ref * c.d_hat) / c.divisor;
    }
    nd.accepted = nd.divisor >= guard;
    nd.q_hat = nd.accepted ? nd.q_ref + acc / 3.0 : std::numeric_limits<double>::quiet_NaN();
    accepted += nd.accepted;
    res.nodes.push_back(nd);
  }
  res.accepted_fraction = static_cast<double>(accepted) / static_cast<double>(targets.size());

  res.probe_margin = std::numeric_limits<double>::infinity();
  double dmax = 0, emax = 0;
  for (const auto& s : res.samples) {
    res.max_residual = std::max(res.max_residual, s.residual);
    res.cg_iterations += s.iterations;
    res.probe_margin = std::min(res.probe_margin, std::abs(s.u1) - 0.5);
    if (cfg.truth) {
      dmax = std::max(dmax, std::abs(s.d_direct));
      emax = std::max(emax, std::abs(s.d_hat - s.d_direct));
    }
  }
  if (cfg.truth) {
    res.d_error = dmax > 0 ? emax / dmax : emax;
    const double cell = std::pow(sx * h, g.dim());
    double e2 = 0, n2 = 0;
    for (const auto& nd : res.nodes) {
      n2 += (nd.q_true - nd.q_ref) * (nd.q_true - nd.q_ref) * cell;
      if (nd.accepted) e2 += (nd.q_hat - nd.q_true) * (nd.q_hat - nd.q_true) * cell;
    }
    res.abs_error = std::sqrt(e2);
    if (n2 > 0) res.rel_error = std::sqrt(e2 / n2);
  }
  if (1.0 - res.accepted_fraction > cfg.max_reject_fraction) {
    fail_numerical(format("divisor guard rejected %d of %zu nodes (smallest divisor %g); the probe does not reach K "
                          "with enough amplitude",
                          static_cast<int>(targets.size()) - accepted, targets.size(),
                          std::min_element(res.nodes.begin(), res.nodes.end(),
                                           [](auto& a, auto& b) { return a.divisor < b.divisor; })
                              ->divisor));
  }
  return res;
}

void write_reconstruction_csv(std::ostream& os, const ReconstructionResult& r) {
  os << "x,y,q_hat,q_ref,q_true,divisor,accepted\n";
  for (const auto& n : r.nodes)
    os << format_real(n.x.x) << ',' << format_real(n.x.y) << ',' << format_real(n.q_hat) << ','
       << format_real(n.q_ref) << ',' << format_real(n.q_true) << ',' << format_real(n.divisor) << ','
       << (n.accepted ? 1 : 0) << '\n';
}

// ------------------------------------------------------------ stability sweep

double potential_difference(const Potential& a, const Potential& b, const Region& k) {
  require(a.grid() == b.grid() && a.grid() == k.grid(), "potential difference: grid mismatch");
  const auto nodes = k.nodes();
  const auto w = k.weights();
  double s = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = a[nodes[i]] - b[nodes[i]];
    s += w[i] * d * d;
  }
  return std::sqrt(s * a.grid().cell_volume());
}

namespace {

// log-log interpolation of the cost table at eps, clamped to its range.
double cost_at(const CostTable& t, double eps) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : t.rows)
    if (r.reachable && r.ratio > 0) pts.emplace_back(r.eps, r.ratio);
  if (pts.empty() || !(eps > 0)) return std::numeric_limits<double>::quiet_NaN();
  std::sort(pts.begin(), pts.end());
  if (eps <= pts.front().first) return pts.front().second;
  if (eps >= pts.back().first) return pts.back().second;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [e0, a0] = pts[i];
    const auto [e1, a1] = pts[i + 1];
    if (eps <= e1) {
      const double w = (std::log(eps) - std::log(e0)) / (std::log(e1) - std::log(e0));
      return std::exp((1 - w) * std::log(a0) + w * std::log(a1));
    }
  }
  return pts.back().second;
}

}  // namespace

SweepReport stability_sweep(const std::vector<PotentialPair>& pairs, const SweepConfig& cfg) {
  require(!pairs.empty(), "stability sweep needs at least one pair");
  require(cfg.omega && cfg.target, "stability sweep needs omega and K");
  SweepReport rep;
  rep.rows.resize(pairs.size());

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pr = pairs[i];
    SweepRow& row = rep.rows[i];
    row.id = pr.id;
    try {
      auto m1 = std::make_shared<const SourceToSolutionMap>(pr.q1, cfg.omega, cfg.time);
      auto m2 = std::make_shared<const SourceToSolutionMap>(pr.q2, cfg.omega, cfg.time);
      row.q_diff = potential_difference(*pr.q1, *pr.q2, *cfg.target);
      row.lambda_diff = op_norm_diff(*m1, *m2, cfg.power).value;
      if (cfg.reconstruct) {
        ReconstructionConfig rc = cfg.recon;
        rc.reference = m1;
        rc.data = m2;
        rc.target = cfg.target;
        rc.truth = pr.q2;
        row.recon_error = reconstruct_potential(rc).abs_error;
      }
      if (i == 0 && !cfg.eps_schedule.empty()) {
        ReconstructionConfig rc = cfg.recon;
        rc.reference = rc.data = m1;
        rc.target = cfg.target;
        std::vector<std::size_t> targets;
        std::vector<int> ray_of;
        const auto rays = plan_rays(rc, targets, ray_of);
        const auto& ray = rays.front();
        const int step = static_cast<int>(std::lround(ray.s_delta / cfg.time.dt()));
        const double s = ray.s_delta - ray.params.delta;
        rep.table = cost_of_control_estimate(data_operator(m1), ray.source, step, s, cfg.eps_schedule);
      }
    } catch (const Error& e) {
      row.ok = false;
      row.note = e.what();
    }
  }

  // The cost table ratio must not decrease as eps decreases.
  {
    auto rows = rep.table.rows;
    std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.eps > b.eps; });
    rep.table_monotone = !rows.empty();
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].reachable && rows[i - 1].reachable && rows[i].ratio < rows[i - 1].ratio) rep.table_monotone = false;
  }

  std::vector<double> dl, dq;
  for (const auto& r : rep.rows)
    if (r.ok) {
      dl.push_back(r.lambda_diff);
      dq.push_back(r.q_diff);
    }
  if (dl.size() >= 2) rep.spearman = spearman(dl, dq);
  rep.fit = fit_double_log(dl, dq);

  // l from log delta = c + l (log eps - log A(eps^l)), grid search over l.
  std::vector<std::pair<double, double>> used;
  for (const auto& r : rep.rows)
    if (r.ok && r.lambda_diff > 0 && r.q_diff > 0) used.emplace_back(r.lambda_diff, r.q_diff);
  if (used.size() >= 2 && !rep.table.rows.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (double ell = 1.0; ell <= 6.0 + 1e-12; ell += 0.01) {
      std::vector<double> res;
      for (auto [d, e] : used) {
        const double a = cost_at(rep.table, std::pow(e, ell));
        res.push_back(std::log(d) - ell * (std::log(e) - std::log(a)));
      }
      double mean = 0;
      for (double v : res) mean += v;
      mean /= static_cast<double>(res.size());
      double ss = 0;
      for (double v : res) ss += (v - mean) * (v - mean);
      const double rms = std::sqrt(ss / static_cast<double>(res.size()));
      if (rms < best) {
        best = rms;
        rep.ell = ell;
        rep.ell_rms = rms;
      }
    }
  }
  for (auto& r : rep.rows) {
    if (!r.ok) continue;
    r.a_hat = cost_at(rep.table, r.q_diff);
    r.ell = rep.ell;
    r.alpha_hat = rep.fit.alpha;
  }
  return rep;
}

void write_sweep_csv(std::ostream& os, const SweepReport& r) {
  os << "pair_id,lambda_diff,q_diff_l2_k,recon_error,a_hat,ell_fit,alpha_fit\n";
  for (const auto& row : r.rows)
    os << row.id << ',' << format_real(row.lambda_diff) << ',' << format_real(row.q_diff) << ','
       << format_real(row.recon_error) << ',' << format_real(row.a_hat) << ',' << format_real(row.ell) << ','
       << format_real(row.alpha_hat) << '\n';
}

void write_cost_csv(std::ostream& os, const CostTable& t) {
  os << "eps,ratio,alpha,reachable\n";
  for (const auto& r : t.rows)
    os << format_real(r.eps) << ',' << format_real(r.ratio) << ',' << format_real(r.alpha) << ','
       << (r.reachable ? 1 : 0) << '\n';
}

}  // namespace bcm
