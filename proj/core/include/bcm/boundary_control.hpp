#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "bcm/cg.hpp"
#include "bcm/connecting_operator.hpp"

namespace bcm {

inline void cg_axpy(BoundaryData& y, double a, const BoundaryData& x) { y.axpy(a, x); }

/// Drive u^g(t) towards 1_{M(S, s)} u^f(t) with g supported on
/// (t - s, t) x S, S a subset of omega.
struct ControlProblem {
  BoundaryData source;
  int eval_step = 0;     // t = eval_step * dt
  double influence = 0;  // s
  double alpha = 1e-3;
  RegionPtr support;     // S; null means omega
  int max_iters = 2000;
  double tol = -1.0;     // relative CG residual; negative means min(1e-8, alpha/100)
};

struct ControlSolution {
  BoundaryData g;
  double alpha = 0.0;
  double misfit = 0.0;     // A(g) = ||u^g(t) - u^f(t)||^2 from data
  double objective = 0.0;  // A(g) + alpha ||g||^2
  double gamma_hat = 0.0;
  double g_norm = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Inclusive control step window [k0, k1] for a problem.
std::pair<int, int> control_window(const ControlProblem& p, const TimeGrid& time);
/// Region reached by the control: M(S, s).
Region control_target_region(const ControlProblem& p, const Region& omega);

/// Tikhonov control by CG on (P K_t P + alpha) g = P K_t f, where K_t is the
/// connecting operator at horizon 2 * eval_step. `guess` warm-starts CG.
ControlSolution solve_control(const ConnectingOperator& k, const ControlProblem& p,
                              const BoundaryData* guess = nullptr);

/// A(g) = <g,K g> - 2 Re <g,K f> + <f,K f> at horizon 2 * eval_step.
double misfit_from_data(const ConnectingOperator& k, const BoundaryData& g, const BoundaryData& f, int eval_step);

/// max(0, A_alpha(g_alpha) - alpha ||g_alpha||^2).
double gamma_estimate(const ControlSolution& s);

/// Controls along a decreasing alpha schedule, warm-started.
std::vector<ControlSolution> solve_control_path(const ConnectingOperator& k, ControlProblem p,
                                                const std::vector<double>& alphas);

/// Knee of the L-curve (||g||, A) along a decreasing alpha path: the first
/// point after which the misfit arm is flat, i.e. the next alpha lowers A by
/// at most flat_tol relative. Falls back to the last point.
std::size_t lcurve_knee(const std::vector<ControlSolution>& path, double flat_tol = 0.01);

void write_control_csv(std::ostream& os, const std::vector<ControlSolution>& path);

/// (1_{M(omega,s)} u^f(t), u^h(t')) estimated from data.
Complex indicator_inner(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h, int step_t,
                        int step_tp, double s, double alpha);

/// (1_{M(omega,s)} 1_{M(omega',s')} u^f(t), u^h(t')) by two successive
/// controls: first onto M(omega', s') with sources in omega', then onto
/// M(omega, s).
Complex indicator_inner_intersection(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h,
                                     int step_t, int step_tp, double s, const RegionPtr& omega_prime,
                                     double s_prime, double alpha);

struct CapRegion {
  Point x0;
  Point y;
  Point normal;
  double r = 0;
  double s = 0;
  double eta = 0;
  RegionPtr inner;  // B(y - r nu, r)
  RegionPtr outer;  // B(y - 2 r nu, 2 r)
  RegionPtr cap;    // M(inner, s + eta) \ M(outer, s - eta)
  double volume = 0;
};

/// Nearest boundary node of omega to x0, its outward normal, and the cap.
CapRegion cap_build(Point x0, const RegionPtr& omega, double r, double eta);

struct CapStep {
  double eta = 0;
  double alpha = 0;
  double eps = 0;  // informational target accuracy of this stage
};

struct PointValue {
  Complex value;
  bool converged = false;
  int stages = 0;
  std::vector<Complex> history;
};

/// u^f(t, x0) conj(u^h(t', x0)) from data, refined along the schedule until
/// two successive estimates agree within rel_tol.
PointValue point_value_product(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h,
                               int step_t, int step_tp, Point x0, double r, const std::vector<CapStep>& schedule,
                               double rel_tol);

struct CapDiagnostics {
  int iterations = 0;      // CG iterations over both controls
  double residual = 0.0;   // worst final relative CG residual
  bool converged = true;
};

/// Same with a fixed cap; returns the cap average for one (eta, alpha).
Complex cap_average(const ConnectingOperator& k, const CapRegion& cap, const BoundaryData& f,
                    const BoundaryData& h, int step_t, int step_tp, double alpha, CapDiagnostics* diag = nullptr);

struct CostRow {
  double eps = 0;
  double ratio = 0;  // ||g|| / ||u^f(t)||_{H^1(M)}
  double alpha = 0;
  bool reachable = true;
};

struct CostTable {
  std::vector<CostRow> rows;
  double target_h1 = 0;
  double target_l2 = 0;
};

/// Cost of control table for the target 1_M u^f(t). The relative error of a
/// control is ||u^g(t) - 1_M u^f(t)|| / ||u^f(t)||_{H^1(M)}, evaluated by a
/// direct solve. Controls are pooled over an alpha bisection per eps, and
/// each row reports the smallest pooled norm within its budget.
CostTable cost_of_control_estimate(const ConnectingOperator& k, const BoundaryData& f, int step_t, double s,
                                   const std::vector<double>& eps_schedule, double alpha_min = 1e-9,
                                   double alpha_max = 1.0, int bisection_steps = 8);

}  // namespace bcm
