#include "bcm/connecting_operator.hpp"

#include <algorithm>

#include "bcm/error.hpp"

namespace bcm {

ConnectingOperator::ConnectingOperator(MapPtr map, int horizon) : map_(std::move(map)) {
  require(map_ != nullptr, "connecting operator needs a map");
  horizon_ = horizon < 0 ? map_->time().steps() : horizon;
  require(horizon_ >= 2 && horizon_ <= map_->time().steps(), "connecting operator horizon outside the time grid");
  require(horizon_ % 2 == 0, "connecting operator horizon must be an even number of steps");
}

BoundaryData apply_J(const BoundaryData& f, int horizon) {
  const int H = horizon < 0 ? f.steps() : horizon;
  require(H % 2 == 0 && H <= f.steps(), "apply_J: horizon must be even and on the grid");
  const int N = H / 2;
  const std::size_t nn = f.nodes();
  const double dt = f.time().dt();
  BoundaryData out(f.region_ptr(), f.time());
  // prefix[l] = g^l + g^{l-2} + ...
  std::vector<Complex> prefix(static_cast<std::size_t>(H) * nn);
  for (int l = 0; l < H; ++l) {
    auto src = f.row(l);
    for (std::size_t j = 0; j < nn; ++j)
      prefix[l * nn + j] = src[j] + (l >= 2 ? prefix[(l - 2) * nn + j] : Complex{});
  }
  for (int k = 0; k < N; ++k) {
    const int a = k + 1, b = H - 1 - k;
    auto dst = out.row(k);
    for (std::size_t j = 0; j < nn; ++j) {
      Complex s = prefix[b * nn + j];
      if (a >= 2) s -= prefix[(a - 2) * nn + j];
      dst[j] = dt * s;
    }
  }
  return out;
}

BoundaryData ConnectingOperator::apply(const BoundaryData& h) const {
  const int H = horizon_;
  BoundaryData out = apply_J(map_->apply(h, H), H);
  out -= map_->apply_adjoint(apply_J(h, H), H);
  out.set_window(0, half() - 1);
  return out;
}

Complex blago_inner(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h) {
  return boundary_inner(f, k.apply(h), 0, k.half());
}

namespace {

BoundaryData truncate_before(const BoundaryData& f, int step) {
  BoundaryData out(f);
  out.set_window(0, step - 1);
  return out;
}

}  // namespace

Complex inner_product_at_times(const ConnectingOperator& k, const BoundaryData& f, const BoundaryData& h,
                               int step_a, int step_b) {
  const int N = std::max(step_a, step_b);
  require(step_a > 0 && step_b > 0 && 2 * N <= k.map().time().steps(),
          "inner_product_at_times: evaluation times must lie in (0, T/2]");
  BoundaryData fa = translate(truncate_before(f, step_a), N - step_a);
  BoundaryData hb = translate(truncate_before(h, step_b), N - step_b);
  return blago_inner(k.with_horizon(2 * N), fa, hb);
}

CorrelationField correlation_solve(const BoundaryData& f, const BoundaryData& h, const BoundaryData& lf,
                                   const BoundaryData& lh, int half) {
  require(f.compatible(h) && f.compatible(lf) && f.compatible(lh), "correlation_solve: incompatible data");
  const int N = half < 0 ? f.steps() / 2 : half;
  require(N >= 1 && 2 * N <= f.steps(), "correlation_solve: half horizon outside the grid");
  const double dt = f.time().dt();
  const double dt2 = dt * dt;
  const auto w = f.region().weights();
  const double vol = f.region().grid().cell_volume();

  auto pair = [&](std::span<const Complex> a, std::span<const Complex> b) {
    Complex s{};
    for (std::size_t j = 0; j < a.size(); ++j) s += w[j] * a[j] * std::conj(b[j]);
    return s * vol;
  };

  // Upper triangle l >= k of W for the ordered pair (p, q).
  auto sweep = [&](const BoundaryData& p, const BoundaryData& q, const BoundaryData& lp, const BoundaryData& lq) {
    const int L = 2 * N;
    Eigen::MatrixXcd G(N, L);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < L; ++b) G(a, b) = pair(p.row(a), lq.row(b)) - pair(lp.row(a), q.row(b));
    Eigen::MatrixXcd W = Eigen::MatrixXcd::Zero(N + 1, L + 1);
    for (int l = 1; l < L; ++l) W(1, l) = 0.5 * dt2 * G(0, l);
    for (int k = 1; k < N; ++k)
      for (int l = k + 1; l <= L - k - 1; ++l)
        W(k + 1, l) = W(k, l + 1) + W(k, l - 1) - W(k - 1, l) + dt2 * G(k, l);
    return std::pair{W, G};
  };

  auto [wfh, gfh] = sweep(f, h, lf, lh);
  auto [whf, ghf] = sweep(h, f, lh, lf);
  CorrelationField out;
  out.dt = dt;
  out.w = Eigen::MatrixXcd::Zero(N + 1, N + 1);
  out.f = Eigen::MatrixXcd::Zero(N + 1, N + 1);
  for (int k = 0; k <= N; ++k)
    for (int l = 0; l <= N; ++l) {
      out.w(k, l) = l >= k ? wfh(k, l) : std::conj(whf(l, k));
      if (k < N && l < N) out.f(k, l) = gfh(k, l);
    }
  return out;
}

}  // namespace bcm
