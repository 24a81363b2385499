#include <gtest/gtest.h>

#include <bcm/error.hpp>
#include <bcm/geometric_optics.hpp>

#include "common.hpp"

using namespace bcm;

namespace {

struct GoSetup {
  bcmtest::Layout1D L;
  PotentialPtr q;
  SourceToSolutionMap map;

  GoSetup(double h, double T, PotentialPtr pot = nullptr)
      : L(h, T), q(pot ? pot : L.bump(-0.5, 0.2, 2.0)), map(q, L.omega, L.time) {}
  GoSetup(double h, double T, double constant) : L(h, T), q(constant_potential(L, constant)), map(q, L.omega, L.time) {}

  static PotentialPtr constant_potential(const bcmtest::Layout1D& L, double c) {
    return std::make_shared<const Potential>(L.grid, std::vector<double>(L.grid->size(), c));
  }
};

ProbeParams params(double sigma, int order, double eta = 0.1) { return {{-0.5, 0}, sigma, order, 0.0, eta}; }

}  // namespace

TEST(GeometricOptics, LeadingAmplitudeNormIsConstant) {
  GoSetup S(0.01, 3.2);
  GOProbe probe(S.map, params(20, 1));
  const int last = static_cast<int>(std::lround(probe.s_delta() / S.L.time.dt()));
  AnsatzStream st(probe, last);
  double first = -1;
  for (int k = 0; k <= last; ++k) {
    st.advance();
    double s = 0;
    for (const auto& z : st.amplitude(0)) s += std::norm(z);
    if (first < 0) first = s;
    EXPECT_NEAR(s, first, 1e-10 * first) << "step " << k;
  }
}

TEST(GeometricOptics, FirstAmplitudeForConstantPotential) {
  // With q = c in 1D, a0 is a travelling profile with box a0 = 0, so the
  // first transport equation 2 (d_t + nu d_x) a1 = i c a0 gives a1 = (i/2) c t a0.
  const double c = 0.7;
  GoSetup S(0.01, 3.2, c);
  GOProbe probe(S.map, params(20, 1));
  const int last = static_cast<int>(std::lround(probe.s_delta() / S.L.time.dt()));
  AnsatzStream st(probe, last);
  double worst = 0, scale = 0;
  for (int k = 0; k <= last; ++k) {
    st.advance();
    const double t = S.L.time.time(k);
    const auto a0 = st.amplitude(0), a1 = st.amplitude(1);
    for (std::size_t n = 0; n < a0.size(); ++n) {
      worst = std::max(worst, std::abs(a1[n] - Complex(0, 0.5 * c * t) * a0[n]));
      scale = std::max(scale, std::abs(a1[n]));
    }
  }
  EXPECT_GT(scale, 0.1);
  EXPECT_LT(worst, 1e-12 * scale);
}

TEST(GeometricOptics, AnsatzIsSupportedNearTheRay) {
  GoSetup S(0.01, 3.2);
  GOProbe probe(S.map, params(20, 2));
  const double reach = probe.chi().plateau + probe.chi().transition + 2 * S.L.h;
  const int last = static_cast<int>(std::lround(probe.s_delta() / S.L.time.dt()));
  double outside = 0;
  sweep_ansatz(probe, last, [&](int k, std::span<const Complex> v) {
    const Point b = probe.beta(S.L.time.time(k));
    for (std::size_t n = 0; n < v.size(); ++n)
      if (norm(S.L.grid->position(n) - b) > reach) outside = std::max(outside, std::abs(v[n]));
  });
  EXPECT_EQ(outside, 0.0);
}

TEST(GeometricOptics, AnsatzResidualDecaysWithOrder) {
  // At Courant number 1 the discrete d'Alembertian is exact on the phase, so
  // the residual of the order-N ansatz is sigma^-N times an O(1) amplitude term.
  GoSetup S(0.01, 3.2);
  for (int order : {1, 2}) {
    const double r1 = ansatz_residual(GOProbe(S.map, params(10, order)), 300);
    const double r2 = ansatz_residual(GOProbe(S.map, params(20, order)), 300);
    EXPECT_NEAR(std::log2(r1 / r2), order, 0.35) << "order " << order;
  }
}

TEST(GeometricOptics, RemainderDecaysAndSourceNormGrowsBoundedly) {
  GoSetup S(0.005, 3.2);
  const auto rep = remainder_check(S.map, params(0, 0), {10, 20, 40});
  EXPECT_EQ(rep.fitted, 3);
  EXPECT_LT(rep.slope, 0.0);
  EXPECT_GT(rep.h2_slope, 0.0);
  EXPECT_LE(rep.h2_slope, 4.5);
}

TEST(GeometricOptics, FlagsUnderResolvedSigma) {
  GoSetup S(0.02, 3.2);
  const auto rep = remainder_check(S.map, params(0, 0, 0.05), {5, 40});
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_FALSE(rep.rows[0].ppw_flag);
  EXPECT_TRUE(rep.rows[1].ppw_flag);
}

TEST(GeometricOptics, RejectsInvalidProbes) {
  GoSetup S(0.01, 3.2);
  EXPECT_THROW(GOProbe(S.map, params(20, 1, 0.0)), Error);
  EXPECT_THROW(GOProbe(S.map, {{2.5, 0}, 20, 1, 0.0, 0.1}), Error);  // inside omega
  EXPECT_THROW(GOProbe(S.map, params(0, 1)), Error);                  // order >= 1 needs sigma > 0
  EXPECT_THROW(GOProbe(S.map, params(20, 1, 0.4)), Error);            // cutoffs wider than omega allows
}

TEST(GeometricOptics, SourceStaysInsideOmega) {
  GoSetup S(0.01, 3.2);
  GOProbe probe(S.map, params(20, 1));
  const auto h = build_source(probe);
  std::vector<std::uint8_t> edge(S.L.grid->size(), 0);
  for (std::size_t n : S.L.omega->boundary_nodes()) edge[n] = 1;
  double boundary = 0, inside = 0;
  for (int k = 0; k <= h.steps(); ++k)
    for (std::size_t j = 0; j < h.nodes(); ++j) {
      double& slot = edge[S.L.omega->nodes()[j]] ? boundary : inside;
      slot = std::max(slot, std::abs(h.at(k, j)));
    }
  EXPECT_GT(inside, 0.0);
  EXPECT_EQ(boundary, 0.0);
}

TEST(GeometricOptics, ProbeLocalizesAtTarget) {
  GoSetup S(0.01, 3.2);
  GOProbe probe(S.map, params(20, 1));
  const int k = static_cast<int>(std::lround(probe.s_delta() / S.L.time.dt()));
  const auto u = probe_field(S.map, probe, k);
  const double peak = std::abs(u[S.L.grid->nearest_node({-0.5, 0})]);
  const double width = probe.chi().plateau + probe.chi().transition;
  double far = 0;
  for (std::size_t n = 0; n < u.grid().size(); ++n)
    if (std::abs(S.L.grid->position(n).x + 0.5) > width + 0.1) far = std::max(far, std::abs(u[n]));
  EXPECT_GT(peak, 0.5);
  EXPECT_LT(far, 0.1 * peak);
}

TEST(GeometricOptics, LowerBoundMarginShrinksWithPotentialSize) {
  bcmtest::Layout1D L(0.01, 3.2);
  double prev = 2.0;
  for (double amp : {0.0, 2.0, 20.0}) {
    SourceToSolutionMap map(L.bump(-0.5, 0.2, amp), L.omega, L.time);
    const auto lb = probe_lower_bound(map, params(0, 1), {5});
    EXPECT_TRUE(lb.achieved) << amp;
    EXPECT_LT(lb.margin, prev) << amp;
    prev = lb.margin;
  }
}
