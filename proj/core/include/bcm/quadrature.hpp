#pragma once

#include <array>

namespace bcm {

/// Composite 8-point Gauss-Legendre rule on [a, b] with `panels` equal panels.
template <class F>
double gauss_legendre(double a, double b, int panels, F&& f) {
  static constexpr std::array<double, 4> x{0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                           0.9602898564975363};
  static constexpr std::array<double, 4> w{0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                           0.1012285362903763};
  const double len = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * len;
    const double r = 0.5 * len;
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += w[i] * (f(c - r * x[i]) + f(c + r * x[i]));
    sum += s * r;
  }
  return sum;
}

}  // namespace bcm
