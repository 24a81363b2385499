#pragma once

#include <Eigen/Dense>

#include "bcm/source_to_solution.hpp"

namespace bcm {

/// K(Lambda) at an even horizon H <= nt, acting on data supported before H/2.
///   K = J Lambda - R Lambda R J
/// with all operators taken on the horizon H. The output is restricted to
/// steps < H/2, where the pairing with the input takes place.
class ConnectingOperator {
 public:
  explicit ConnectingOperator(MapPtr map, int horizon = -1);

  const SourceToSolutionMap& map() const { return *map_; }
  const MapPtr& map_ptr() const { return map_; }
  int horizon() const { return horizon_; }
  int half() const { return horizon_ / 2; }
  ConnectingOperator with_horizon(int horizon) const { return ConnectingOperator(map_, horizon); }

  BoundaryData apply(const BoundaryData& h) const;

 private:
  MapPtr map_;
  int horizon_;
};

/// (J g)(t_k) = dt * sum g(t_l) over l = k+1, k+3, ..., H-1-k for k < H/2,
/// zero for k >= H/2. This is the discrete counterpart of
/// 1/2 int_{t_k}^{T-t_k} g that makes the identity below exact for leapfrog.
BoundaryData apply_J(const BoundaryData& f, int horizon = -1);

/// <f, K h> over (0, H/2); equals (u^f(H/2), u^h(H/2)).
Complex blago_inner(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h);

/// (u^f(t_a), u^h(t_b)) from data alone: truncate each source at its
/// evaluation step, translate both so that the evaluations land on
/// N = max(a, b), and apply blago_inner at horizon 2N.
Complex inner_product_at_times(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h,
                               int step_a, int step_b);

/// W(t_k, t_l) = (u^f(t_k), u^h(t_l)) on [0, N]^2 computed from F alone.
struct CorrelationField {
  Eigen::MatrixXcd w;  // (N+1) x (N+1)
  Eigen::MatrixXcd f;  // F(t_k, t_l) on the same square
  double dt = 0.0;
};

/// Solves the discrete 1D wave equation in (t, s) satisfied by W with
/// right-hand side F(t, s) = (f(t), Lambda h(s)) - (Lambda f(t), h(s)).
CorrelationField correlation_solve(const BoundaryData& f, const BoundaryData& h, const BoundaryData& lf,
                                   const BoundaryData& lh, int half = -1);

}  // namespace bcm
