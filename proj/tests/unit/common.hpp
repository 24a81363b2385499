#pragma once

#include <bcm/grid.hpp>
#include <bcm/wave_solver.hpp>
#include <cmath>
#include <numbers>

namespace bcmtest {

inline double cos4(double z) {
  if (std::abs(z) >= 1) return 0.0;
  const double c = std::cos(std::numbers::pi * z / 2);
  return c * c * c * c;
}

inline bcm::GridPtr line_grid(double lo, double hi, double h) {
  return std::make_shared<const bcm::SpatialGrid>(bcm::SpatialGrid::covering(1, {lo, 0}, {hi, 0}, h));
}

/// Standard 1D layout: omega = [2, 3], K = [-1, 0], box padded for the horizon.
struct Layout1D {
  double h;
  bcm::TimeGrid time;
  bcm::GridPtr grid;
  bcm::RegionPtr omega, k;

  Layout1D(double h_, double T, double cfl = 1.0)
      : h(h_),
        time(bcm::TimeGrid::from_cfl(T, h_, 1, cfl)),
        grid(std::make_shared<const bcm::SpatialGrid>(
            bcm::padded_box(1, {{-1, 0}, {0, 0}}, {{2, 0}, {3, 0}}, time, h_))),
        omega(std::make_shared<const bcm::Region>(bcm::Region::box(grid, {2, 0}, {3, 0}, bcm::RegionKind::omega))),
        k(std::make_shared<const bcm::Region>(bcm::Region::box(grid, {-1, 0}, {0, 0}, bcm::RegionKind::target_k))) {}

  bcm::PotentialPtr zero() const { return std::make_shared<const bcm::Potential>(grid); }
  bcm::PotentialPtr bump(double c, double w, double a) const {
    bcm::GaussianBump b{{c, 0}, w, a};
    return std::make_shared<const bcm::Potential>(bcm::Potential::from_bumps(grid, std::span(&b, 1)));
  }
  bcm::BoundaryData pulse(double tc = 0.4, double tw = 0.3, double xc = 2.5, double r = 0.3) const {
    return bcm::BoundaryData::sample(omega, time, [=](double t, bcm::Point x) {
      return bcm::Complex(cos4((t - tc) / tw) * cos4((x.x - xc) / r));
    });
  }
};

}  // namespace bcmtest
