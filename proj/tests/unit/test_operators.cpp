#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <bcm/connecting_operator.hpp>
#include <random>

#include "common.hpp"

using namespace bcm;

namespace {

struct Fixture {
  bcmtest::Layout1D L{0.02, 4.0};
  PotentialPtr q = L.bump(1.0, 0.3, 2.0);
  MapPtr map = std::make_shared<const SourceToSolutionMap>(q, L.omega, L.time);
  BoundaryData f = BoundaryData::sample(L.omega, L.time, [](double t, Point x) {
    return Complex(std::sin(3 * t) * std::exp(-t) * std::cos(2 * x.x) + (t < 1 ? t : 0.0));
  });
  BoundaryData g = BoundaryData::sample(L.omega, L.time, [](double t, Point x) {
    return Complex(std::cos(5 * t + x.x) * t, 0.3 * t * t);
  });
};

ScalarField solve_at(const SourceToSolutionMap& m, const BoundaryData& f, int k) {
  SolveOptions o;
  o.storage = Storage::selected;
  o.stored_steps = {k};
  return m.solver().solve(f, o).field.at(k);
}

}  // namespace

TEST(Operators, AdjointIsTimeReversal) {
  Fixture F;
  const Complex a = data_inner(F.map->apply(F.f), F.g), b = data_inner(F.f, F.map->apply_adjoint(F.g));
  EXPECT_LT(std::abs(a - b), 1e-12 * data_norm(F.f) * data_norm(F.g));
}

TEST(Operators, ApplyJOnConstant) {
  Fixture F;
  TimeGrid tg(1.0, 10);
  auto one = BoundaryData::sample(F.L.omega, tg, [](double, Point) { return Complex(1.0); });
  const auto j = apply_J(one);
  for (int k = 0; k <= 10; ++k) {
    const double expect = k < 5 ? (5 - k) * tg.dt() : 0.0;
    EXPECT_NEAR(j.at(k, 0).real(), expect, 1e-14) << "k = " << k;
  }
}

TEST(Operators, BlagoveshchenskiiMatchesDirectInnerProduct) {
  Fixture F;
  const ConnectingOperator k(F.map);
  const int half = F.L.time.steps() / 2;
  BoundaryData f = F.f, g = F.g;
  f.set_window(0, half - 1);
  g.set_window(0, half - 1);
  const Complex data = blago_inner(k, f, g);
  const auto whole = Region::whole(F.L.grid);
  const Complex direct = l2_inner(solve_at(*F.map, f, half), solve_at(*F.map, g, half), whole);
  EXPECT_LT(std::abs(data - direct), 1e-12 * std::abs(direct));
}

TEST(Operators, InnerProductAtDifferentTimes) {
  Fixture F;
  const ConnectingOperator k(F.map);
  const int n = F.L.time.steps() / 2;
  const auto whole = Region::whole(F.L.grid);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{n / 2, n / 3}, {n, n / 4}, {n / 5, n}}) {
    const Complex data = inner_product_at_times(k, F.f, F.g, a, b);
    const Complex direct = l2_inner(solve_at(*F.map, F.f, a), solve_at(*F.map, F.g, b), whole);
    EXPECT_LT(std::abs(data - direct), 1e-11 * (1 + std::abs(direct))) << a << ", " << b;
  }
}

TEST(Operators, CorrelationSolveMatchesDirect) {
  Fixture F;
  const int n = F.L.time.steps() / 2;
  const auto cf = correlation_solve(F.f, F.g, F.map->apply(F.f), F.map->apply(F.g));
  const auto whole = Region::whole(F.L.grid);
  for (auto [a, b] : std::vector<std::pair<int, int>>{{n, n}, {n / 2, n / 3}, {n / 3, n / 2}}) {
    const Complex direct = l2_inner(solve_at(*F.map, F.f, a), solve_at(*F.map, F.g, b), whole);
    EXPECT_LT(std::abs(cf.w(a, b) - direct), 1e-10 * (1 + std::abs(direct)));
  }
}

TEST(Operators, TranslateAndReverse) {
  Fixture F;
  const auto r = apply_R(apply_R(F.f));
  for (int k = 0; k <= F.L.time.steps(); ++k) EXPECT_EQ(r.at(k, 3), F.f.at(k, 3));
  BoundaryData early = F.f;
  early.set_window(0, 20);
  const auto t = translate(early, 7);
  EXPECT_EQ(t.at(17, 5), early.at(10, 5));
  EXPECT_EQ(t.at(3, 5), Complex(0.0));
}

TEST(Operators, ConnectingOperatorIsPositiveOnCoarseBasis) {
  Fixture F;
  const ConnectingOperator k(F.map);
  const CoarseBasis basis(F.L.omega, F.L.time, 10, 5, 0, k.half() - 1);
  const auto d = assemble_dense([&](const BoundaryData& x) { return k.apply(x); }, basis);
  const Eigen::MatrixXcd m = d.matrix;
  EXPECT_LT((m - m.adjoint()).norm(), 1e-10 * m.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (m + m.adjoint()));
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff());
}

TEST(Operators, PowerIterationMatchesSvd) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd a(30, 30), b(30, 30);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      a(i, j) = {nd(rng), nd(rng)};
      b(i, j) = {nd(rng), nd(rng)};
    }
  const double svd = Eigen::JacobiSVD<Eigen::MatrixXcd>(a - b).singularValues()(0);
  const auto est = op_norm_diff(a, b, {2000, 1e-12, 3});
  EXPECT_TRUE(est.converged);
  EXPECT_NEAR(est.value, svd, 1e-6 * svd);
}

TEST(Operators, OperatorNormDifferenceVanishesForEqualPotentials) {
  bcmtest::Layout1D L(0.04, 7.2);
  auto m1 = std::make_shared<const SourceToSolutionMap>(L.bump(-0.5, 0.2, 1.0), L.omega, L.time);
  auto m2 = std::make_shared<const SourceToSolutionMap>(L.bump(-0.5, 0.2, 1.0), L.omega, L.time);
  EXPECT_EQ(op_norm_diff(*m1, *m2).value, 0.0);
  auto m3 = std::make_shared<const SourceToSolutionMap>(L.bump(-0.5, 0.2, 2.0), L.omega, L.time);
  EXPECT_GT(op_norm_diff(*m1, *m3).value, 0.0);
}
