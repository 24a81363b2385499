#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>

#include "bcm/grid.hpp"
#include "bcm/wave_solver.hpp"

namespace bcm {

/// Tensor basis of piecewise-linear hats: interior hats in time over an
/// inclusive step range times interior hats over the bounding box of omega.
class CoarseBasis {
 public:
  CoarseBasis(RegionPtr omega, TimeGrid time, int time_hats, int space_hats, int k0, int k1);

  std::size_t size() const { return static_cast<std::size_t>(nt_) * ns_; }
  int time_hats() const { return nt_; }
  int space_hats() const { return ns_; }
  const RegionPtr& omega() const { return omega_; }
  const TimeGrid& time() const { return time_; }

  BoundaryData function(std::size_t i) const;
  /// sum_i c_i b_i
  BoundaryData expand(const Eigen::VectorXcd& c) const;
  /// r_i = <y, b_i>, evaluated separably in space and time.
  Eigen::VectorXcd project(const BoundaryData& y) const;

 private:
  double time_hat(int a, int k) const;
  double space_hat(int b, std::size_t local) const;

  RegionPtr omega_;
  TimeGrid time_;
  int nt_, ns_;
  int k0_, k1_;
};

/// Operator restricted to span(basis), written in an orthonormal coordinate
/// system obtained from the Cholesky factor of the Gram matrix.
struct DenseOperator {
  Eigen::MatrixXcd matrix;    // orthonormal coordinates
  Eigen::MatrixXcd galerkin;  // <L b_j, b_i>
  Eigen::MatrixXcd gram;      // <b_j, b_i>
  Eigen::MatrixXcd chol;      // lower factor of gram

  /// Orthonormal coordinates of P_V x.
  Eigen::VectorXcd coordinates(const CoarseBasis& basis, const BoundaryData& x) const;
  /// Basis coefficients for orthonormal coordinates y.
  Eigen::VectorXcd coefficients(const Eigen::VectorXcd& y) const;
};

enum class MapMode { matrix_free, dense_on_basis };

/// Lambda_q: f on (0,T) x omega maps to u^f restricted to (0,T) x omega.
class SourceToSolutionMap {
 public:
  SourceToSolutionMap(PotentialPtr q, RegionPtr omega, TimeGrid time);

  const Potential& potential() const { return solver_.potential(); }
  const PotentialPtr& potential_ptr() const { return solver_.potential_ptr(); }
  const RegionPtr& omega() const { return omega_; }
  const TimeGrid& time() const { return solver_.time(); }
  const WaveSolver& solver() const { return solver_; }
  MapMode mode() const { return dense_ ? MapMode::dense_on_basis : MapMode::matrix_free; }
  const DenseOperator* dense() const { return dense_.get(); }
  const CoarseBasis* basis() const { return basis_.get(); }

  BoundaryData zeros() const { return BoundaryData(omega_, time()); }

  /// Lambda f on steps [0, horizon]; later steps are zero. horizon -1 means nt.
  BoundaryData apply(const BoundaryData& f, int horizon = -1) const;
  /// R Lambda R on the same horizon.
  BoundaryData apply_adjoint(const BoundaryData& h, int horizon = -1) const;

  /// Copy of this map carrying a dense assembly on the given basis.
  SourceToSolutionMap densified(const CoarseBasis& basis, std::size_t cap = 600) const;

 private:
  WaveSolver solver_;
  RegionPtr omega_;
  std::shared_ptr<const CoarseBasis> basis_;
  std::shared_ptr<const DenseOperator> dense_;
};

using MapPtr = std::shared_ptr<const SourceToSolutionMap>;

/// (R f)(t_k) = f(t_{H-k}) for k <= H, zero beyond. horizon -1 means nt.
BoundaryData apply_R(const BoundaryData& f, int horizon = -1);
/// (tau_s f)(t_k) = f(t_{k-s}); fails if nonzero values leave [0, nt].
BoundaryData translate(const BoundaryData& f, int shift_steps);

struct PowerOptions {
  int max_iters = 200;
  double tol = 1e-6;
  std::uint64_t seed = 20240611;
};

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double rel_change = 0.0;
};

/// ||Lambda_1 - Lambda_2|| by power iteration on D^* D.
NormEstimate op_norm_diff(const SourceToSolutionMap& m1, const SourceToSolutionMap& m2,
                          const PowerOptions& opt = {});
/// Power iteration on the difference of two dense matrices.
NormEstimate op_norm_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, const PowerOptions& opt = {});

using LinearOp = std::function<BoundaryData(const BoundaryData&)>;

DenseOperator assemble_dense(const LinearOp& op, const CoarseBasis& basis, std::size_t cap = 600);
DenseOperator assemble_dense(const SourceToSolutionMap& m, const CoarseBasis& basis, std::size_t cap = 600);

/// Row-major CSV; each complex entry becomes a (re, im) column pair.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXcd& m);

}  // namespace bcm
