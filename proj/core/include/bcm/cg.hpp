#pragma once

#include <cmath>
#include <complex>

namespace bcm {

struct CgReport {
  int iterations = 0;
  double residual = 0.0;  // final ||r|| / ||b||
  bool converged = false;
};

/// y += a x; overloaded for types with a cheaper in-place update.
template <class V>
void cg_axpy(V& y, double a, const V& x) {
  y += a * x;
}

/// Conjugate gradients for a Hermitian positive definite operator with
/// respect to the inner product `dot` (linear in the first slot). x holds the
/// initial guess on entry and the solution on exit. V needs copy, +=, -=,
/// *= scalar and scalar * V, or a cg_axpy overload.
template <class V, class Op, class Dot>
CgReport conjugate_gradient(const Op& apply, const V& b, V& x, const Dot& dot, double tol, int max_iters) {
  CgReport rep;
  const double bnorm = std::sqrt(std::real(dot(b, b)));
  if (bnorm == 0.0) {
    x = b;
    rep.converged = true;
    return rep;
  }
  V r = b;
  r -= apply(x);
  V p = r;
  double rr = std::real(dot(r, r));
  rep.residual = std::sqrt(rr) / bnorm;
  if (rep.residual <= tol) {
    rep.converged = true;
    return rep;
  }
  for (int it = 1; it <= max_iters; ++it) {
    V ap = apply(p);
    const double pap = std::real(dot(p, ap));
    if (!(pap > 0.0)) break;
    const double a = rr / pap;
    cg_axpy(x, a, p);
    cg_axpy(r, -a, ap);
    const double rr_new = std::real(dot(r, r));
    rep.iterations = it;
    rep.residual = std::sqrt(rr_new) / bnorm;
    if (rep.residual <= tol) {
      rep.converged = true;
      return rep;
    }
    p *= rr_new / rr;
    p += r;
    rr = rr_new;
  }
  return rep;
}

}  // namespace bcm
