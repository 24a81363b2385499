#include <gtest/gtest.h>

#include <bcm/error.hpp>
#include <bcm/reconstruction.hpp>
#include <cmath>
#include <numbers>

#include "common.hpp"

using namespace bcm;

namespace {

ReconstructionConfig config(const bcmtest::Layout1D& L, PotentialPtr q1, PotentialPtr q2) {
  ReconstructionConfig rc;
  rc.reference = std::make_shared<const SourceToSolutionMap>(q1, L.omega, L.time);
  rc.data = std::make_shared<const SourceToSolutionMap>(q2, L.omega, L.time);
  rc.target = L.k;
  rc.probe = {{0, 0}, 0, 0, 0.4, 0.15};
  rc.point_probe = {{0, 0}, 30, 1, 0, 0.1};
  rc.stride = 2;
  rc.time_spacing = 2;
  rc.alpha = 1e-7;
  rc.truth = q2;
  return rc;
}

}  // namespace

TEST(Reconstruction, PotentialDifferenceMatchesGaussianIntegral) {
  bcmtest::Layout1D L(0.005, 7.2);
  const double a = 0.8, c = -0.4, w = 0.2;
  const double d = potential_difference(*L.bump(c, w, a), *L.zero(), *L.k);
  // integral over [-1, 0] of a^2 exp(-(x - c)^2 / w^2)
  const double exact = a * a * w * std::sqrt(std::numbers::pi) / 2 * (std::erf((0 - c) / w) - std::erf((-1 - c) / w));
  EXPECT_NEAR(d, std::sqrt(exact), 1e-5);
  EXPECT_EQ(potential_difference(*L.zero(), *L.zero(), *L.k), 0.0);
}

TEST(Reconstruction, OneRayInOneDimension) {
  bcmtest::Layout1D L(0.02, 7.2);
  auto rc = config(L, L.zero(), L.zero());
  std::vector<std::size_t> targets;
  std::vector<int> ray_of;
  const auto rays = plan_rays(rc, targets, ray_of);
  ASSERT_EQ(rays.size(), 1u);
  EXPECT_FALSE(targets.empty());
  EXPECT_EQ(ray_of.size(), targets.size());
  for (int r : ray_of) EXPECT_EQ(r, 0);
  EXPECT_DOUBLE_EQ(std::abs(rays[0].normal.x), 1.0);
}

TEST(Reconstruction, EqualPotentialsRecoverTheReference) {
  bcmtest::Layout1D L(0.02, 7.2);
  const auto q = L.bump(-0.5, 0.2, 1.0);
  auto rc = config(L, q, q);
  const auto r = reconstruct_potential(rc);
  ASSERT_FALSE(r.nodes.empty());
  EXPECT_GT(r.accepted_fraction, 0.75);
  double worst = 0;
  for (const auto& n : r.nodes)
    if (n.accepted) worst = std::max(worst, std::abs(n.q_hat - n.q_ref));
  EXPECT_LT(worst, 1e-2);
  EXPECT_LT(r.abs_error, 1e-2);
}

TEST(Reconstruction, RejectsShortHorizon) {
  bcmtest::Layout1D L(0.04, 5.0);
  EXPECT_THROW(reconstruct_potential(config(L, L.zero(), L.zero())), Error);
}
