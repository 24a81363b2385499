#include "bcm/source_to_solution.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "bcm/error.hpp"
#include "bcm/format.hpp"

namespace bcm {

// ---------------------------------------------------------------- CoarseBasis

CoarseBasis::CoarseBasis(RegionPtr omega, TimeGrid time, int time_hats, int space_hats, int k0, int k1)
    : omega_(std::move(omega)), time_(time), nt_(time_hats), ns_(space_hats), k0_(k0), k1_(k1) {
  require(time_hats >= 1 && space_hats >= 1, "basis needs at least one hat per factor");
  require(0 <= k0 && k0 < k1 && k1 <= time.steps(), "basis time range outside the grid");
  if (omega_->grid().dim() == 2) ns_ = space_hats * space_hats;
}

double CoarseBasis::time_hat(int a, int k) const {
  const double spacing = double(k1_ - k0_) / (nt_ + 1);
  const double c = k0_ + (a + 1) * spacing;
  return std::max(0.0, 1.0 - std::abs(k - c) / spacing);
}

double CoarseBasis::space_hat(int b, std::size_t local) const {
  const auto& g = omega_->grid();
  const auto bb = omega_->bounding_box();
  auto [i, j] = g.coords(omega_->nodes()[local]);
  auto hat = [](int idx, int lo, int hi, int count, int which) {
    if (hi == lo) return 1.0;
    const double spacing = double(hi - lo) / (count + 1);
    const double c = lo + (which + 1) * spacing;
    return std::max(0.0, 1.0 - std::abs(idx - c) / spacing);
  };
  if (g.dim() == 1) return hat(i, bb[0], bb[1], ns_, b);
  const int per = static_cast<int>(std::lround(std::sqrt(double(ns_))));
  return hat(i, bb[0], bb[1], per, b % per) * hat(j, bb[2], bb[3], per, b / per);
}

BoundaryData CoarseBasis::function(std::size_t idx) const {
  require(idx < size(), "basis index out of range");
  const int a = static_cast<int>(idx / ns_);
  const int b = static_cast<int>(idx % ns_);
  BoundaryData out(omega_, time_);
  std::vector<double> sp(omega_->size());
  for (std::size_t j = 0; j < sp.size(); ++j) sp[j] = space_hat(b, j);
  for (int k = k0_; k <= k1_; ++k) {
    const double th = time_hat(a, k);
    if (th == 0.0) continue;
    auto row = out.row(k);
    for (std::size_t j = 0; j < sp.size(); ++j) row[j] = th * sp[j];
  }
  return out;
}

BoundaryData CoarseBasis::expand(const Eigen::VectorXcd& c) const {
  require(static_cast<std::size_t>(c.size()) == size(), "coefficient vector size mismatch");
  BoundaryData out(omega_, time_);
  for (std::size_t i = 0; i < size(); ++i)
    if (c[i] != Complex{}) out.axpy(c[i], function(i));
  return out;
}

Eigen::VectorXcd CoarseBasis::project(const BoundaryData& y) const {
  require(y.time() == time_ && y.nodes() == omega_->size(), "projection: data does not match the basis");
  const std::size_t nn = omega_->size();
  const auto w = omega_->weights();
  const double vol = omega_->grid().cell_volume() * time_.dt();
  Eigen::MatrixXd sp(ns_, nn);
  for (int b = 0; b < ns_; ++b)
    for (std::size_t j = 0; j < nn; ++j) sp(b, j) = space_hat(b, j) * w[j];
  Eigen::VectorXcd r = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(size()));
  Eigen::VectorXcd row(nn);
  for (int k = k0_; k <= k1_; ++k) {
    const double tw = trapezoid_weight(k, 0, time_.steps());
    auto src = y.row(k);
    for (std::size_t j = 0; j < nn; ++j) row[j] = src[j];
    Eigen::VectorXcd yb = sp * row;
    for (int a = 0; a < nt_; ++a) {
      const double th = time_hat(a, k) * tw;
      if (th == 0.0) continue;
      r.segment(static_cast<Eigen::Index>(a) * ns_, ns_) += th * yb;
    }
  }
  return r * vol;
}

Eigen::VectorXcd DenseOperator::coordinates(const CoarseBasis& basis, const BoundaryData& x) const {
  return chol.triangularView<Eigen::Lower>().solve(basis.project(x));
}

Eigen::VectorXcd DenseOperator::coefficients(const Eigen::VectorXcd& y) const {
  return chol.adjoint().triangularView<Eigen::Upper>().solve(y);
}

DenseOperator assemble_dense(const LinearOp& op, const CoarseBasis& basis, std::size_t cap) {
  const std::size_t n = basis.size();
  if (n > cap) fail_validation("dense basis size " + std::to_string(n) + " exceeds the cap " + std::to_string(cap));
  std::vector<BoundaryData> fns;
  fns.reserve(n);
  for (std::size_t i = 0; i < n; ++i) fns.push_back(basis.function(i));

  DenseOperator d;
  d.gram.resize(n, n);
  d.galerkin.resize(n, n);
  for (std::size_t j = 0; j < n; ++j) d.gram.col(j) = basis.project(fns[j]);

  std::vector<Eigen::VectorXcd> cols(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j) cols[j] = basis.project(op(fns[j]));
  for (std::size_t j = 0; j < n; ++j) d.galerkin.col(j) = cols[j];

  Eigen::LLT<Eigen::MatrixXcd> llt(d.gram);
  if (llt.info() != Eigen::Success) fail_numerical("basis Gram matrix is not positive definite");
  d.chol = llt.matrixL();
  Eigen::MatrixXcd tmp = d.chol.triangularView<Eigen::Lower>().solve(d.galerkin);
  d.matrix = d.chol.triangularView<Eigen::Lower>().solve(tmp.adjoint()).adjoint();
  return d;
}

// ------------------------------------------------------- SourceToSolutionMap

SourceToSolutionMap::SourceToSolutionMap(PotentialPtr q, RegionPtr omega, TimeGrid time)
    : solver_(std::move(q), time), omega_(std::move(omega)) {
  require(omega_ != nullptr, "map needs an omega region");
  require(omega_->grid() == solver_.grid(), "omega and potential live on different grids");
}

BoundaryData SourceToSolutionMap::apply(const BoundaryData& f, int horizon) const {
  require(f.time() == time(), "source time grid does not match the map");
  if (f.region_ptr() != omega_ && !(f.region().grid() == omega_->grid() && f.region().mask() == omega_->mask()))
    fail_validation("support violation: source is not supported on the map's omega");
  const int H = horizon < 0 ? time().steps() : horizon;
  if (f.is_zero()) return zeros();
  SolveOptions opt;
  opt.horizon = H;
  opt.observe = omega_;
  auto res = solver_.solve(f, opt);
  return std::move(*res.trace);
}

BoundaryData SourceToSolutionMap::apply_adjoint(const BoundaryData& h, int horizon) const {
  return apply_R(apply(apply_R(h, horizon), horizon), horizon);
}

SourceToSolutionMap SourceToSolutionMap::densified(const CoarseBasis& basis, std::size_t cap) const {
  require(basis.omega()->mask() == omega_->mask() && basis.time() == time(), "basis does not match the map");
  SourceToSolutionMap out(*this);
  out.basis_ = std::make_shared<const CoarseBasis>(basis);
  out.dense_ = std::make_shared<const DenseOperator>(assemble_dense(*this, basis, cap));
  return out;
}

DenseOperator assemble_dense(const SourceToSolutionMap& m, const CoarseBasis& basis, std::size_t cap) {
  return assemble_dense([&m](const BoundaryData& f) { return m.apply(f); }, basis, cap);
}

// -------------------------------------------------------- R and translations

BoundaryData apply_R(const BoundaryData& f, int horizon) {
  const int H = horizon < 0 ? f.steps() : horizon;
  require(H >= 0 && H <= f.steps(), "reversal horizon outside the time grid");
  BoundaryData out(f.region_ptr(), f.time());
  for (int k = 0; k <= H; ++k) {
    auto src = f.row(H - k);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

BoundaryData translate(const BoundaryData& f, int shift) {
  BoundaryData out(f.region_ptr(), f.time());
  const int nt = f.steps();
  for (int k = 0; k <= nt; ++k) {
    const int dst = k + shift;
    auto src = f.row(k);
    bool nonzero = std::any_of(src.begin(), src.end(), [](Complex z) { return z != Complex{}; });
    if (dst < 0 || dst > nt) {
      if (nonzero) fail_validation("translation moves the support outside (0, T)");
      continue;
    }
    std::copy(src.begin(), src.end(), out.row(dst).begin());
  }
  return out;
}

// ------------------------------------------------------------- norm estimate

NormEstimate op_norm_diff(const SourceToSolutionMap& m1, const SourceToSolutionMap& m2, const PowerOptions& opt) {
  require(m1.time() == m2.time() && m1.omega()->mask() == m2.omega()->mask(),
          "op_norm_diff: maps on different grids or regions");
  if (m1.dense() && m2.dense() && m1.basis() && m2.basis())
    return op_norm_diff(m1.dense()->matrix, m2.dense()->matrix, opt);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  BoundaryData x = m1.zeros();
  for (auto& v : x.values()) v = nd(rng);
  x *= 1.0 / data_norm(x);

  NormEstimate est;
  double lambda_prev = -1.0;
  for (int it = 1; it <= opt.max_iters; ++it) {
    BoundaryData dx = m1.apply(x) - m2.apply(x);
    const double lambda = data_inner(dx, dx).real();
    est.iterations = it;
    if (lambda == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    BoundaryData z = m1.apply_adjoint(dx) - m2.apply_adjoint(dx);
    est.value = std::sqrt(lambda);
    if (lambda_prev >= 0.0) {
      est.rel_change = std::abs(lambda - lambda_prev) / lambda;
      if (est.rel_change <= opt.tol) {
        est.converged = true;
        return est;
      }
    }
    lambda_prev = lambda;
    x = std::move(z);
    x *= 1.0 / data_norm(x);
  }
  return est;
}

NormEstimate op_norm_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, const PowerOptions& opt) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "op_norm_diff: matrix size mismatch");
  const Eigen::MatrixXcd d = a - b;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXcd x(d.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = Complex(nd(rng), nd(rng));
  x.normalize();
  NormEstimate est;
  double lambda_prev = -1.0;
  for (int it = 1; it <= opt.max_iters; ++it) {
    Eigen::VectorXcd dx = d * x;
    const double lambda = dx.squaredNorm();
    est.iterations = it;
    if (lambda == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    est.value = std::sqrt(lambda);
    if (lambda_prev >= 0.0) {
      est.rel_change = std::abs(lambda - lambda_prev) / lambda;
      if (est.rel_change <= opt.tol) {
        est.converged = true;
        return est;
      }
    }
    lambda_prev = lambda;
    x = d.adjoint() * dx;
    x.normalize();
  }
  return est;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXcd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_real(m(i, j).real()) << ',' << format_real(m(i, j).imag());
    }
    os << '\n';
  }
}

}  // namespace bcm
