#include <gtest/gtest.h>

#include <bcm/error.hpp>
#include <numbers>

#include "common.hpp"

using namespace bcm;
using bcmtest::line_grid;

TEST(Grid, CoveringSnapsToMultiplesOfH) {
  const auto g = SpatialGrid::covering(1, {-0.33, 0}, {1.01, 0}, 0.1);
  EXPECT_NEAR(g.lower(0), -0.4, 1e-12);
  EXPECT_GE(g.upper(0), 1.01 - 1e-12);
  EXPECT_EQ(g.count(1), 1);
}

TEST(Grid, TrapezoidIntegralOfSinSquared) {
  // int_0^1 sin^2(pi x) dx = 1/2
  auto g = line_grid(0, 1, 0.01);
  auto r = Region::box(g, {0, 0}, {1, 0}, RegionKind::generic);
  auto u = ScalarField::sample(g, [](Point p) { return Complex(std::sin(std::numbers::pi * p.x)); });
  EXPECT_NEAR(std::pow(l2_norm(u, r), 2), 0.5, 1e-12);
}

TEST(Grid, H1NormOfSine) {
  // ||sin(pi x)||_{H^1(0,1)} = sqrt(1/2 + pi^2/2)
  auto g = line_grid(-0.1, 1.1, 0.001);
  auto r = Region::box(g, {0, 0}, {1, 0}, RegionKind::generic);
  auto u = ScalarField::sample(g, [](Point p) { return Complex(std::sin(std::numbers::pi * p.x)); });
  const double exact = std::sqrt(0.5 + std::numbers::pi * std::numbers::pi / 2);
  EXPECT_NEAR(h1_norm(u, r), exact, 1e-4 * exact);
}

TEST(Grid, DistanceFieldMatchesBruteForce2D) {
  auto g = std::make_shared<const SpatialGrid>(SpatialGrid::covering(2, {0, 0}, {1, 1}, 0.05));
  auto r = Region::ball(g, {0.3, 0.6}, 0.15, RegionKind::omega);
  const auto d = distance_field(r);
  for (std::size_t n = 0; n < g->size(); n += 7) {
    double best = 1e300;
    for (std::size_t m : r.nodes()) best = std::min(best, norm(g->position(n) - g->position(m)));
    EXPECT_NEAR(d[n], best, 1e-12);
  }
}

TEST(Grid, InfluenceRegionAndMaxDistance) {
  auto g = line_grid(-2, 4, 0.01);
  auto om = Region::box(g, {2, 0}, {3, 0}, RegionKind::omega);
  auto k = Region::box(g, {-1, 0}, {0, 0}, RegionKind::target_k);
  EXPECT_NEAR(max_distance(k, om), 3.0, 1e-12);
  auto m = influence_region(om, 0.5);
  EXPECT_TRUE(m.contains(g->nearest_node({1.5, 0})));
  EXPECT_FALSE(m.contains(g->nearest_node({1.49, 0})));
  EXPECT_TRUE(m.contains(g->nearest_node({3.5, 0})));
  EXPECT_FALSE(m.contains(g->nearest_node({3.51, 0})));
}

TEST(Grid, BoundaryInnerTrapezoidInTime) {
  // int_0^1 t^2 dt over omega of length 1 (trapezoid in time, exact in space)
  auto g = line_grid(0, 1, 0.05);
  auto om = std::make_shared<const Region>(Region::box(g, {0, 0}, {1, 0}, RegionKind::omega));
  TimeGrid tg(1.0, 200);
  auto f = BoundaryData::sample(om, tg, [](double t, Point) { return Complex(t); });
  EXPECT_NEAR(std::real(data_inner(f, f)), 1.0 / 3.0, 1e-4);
}

TEST(Grid, TimeGridRejectsOffGridTimes) {
  TimeGrid tg(1.0, 100);
  EXPECT_EQ(tg.step_of(0.25), 25);
  EXPECT_THROW(tg.step_of(0.255), Error);
}

TEST(Grid, BoundaryFrameOnInterval) {
  auto g = line_grid(-2, 4, 0.02);
  auto om = Region::box(g, {2, 0}, {3, 0}, RegionKind::omega);
  const auto fr = boundary_frame({-0.5, 0}, om);
  EXPECT_NEAR(fr.y.x, 2.0, 1e-12);
  EXPECT_NEAR(fr.normal.x, -1.0, 1e-12);
  EXPECT_NEAR(fr.distance, 2.5, 1e-12);
}
