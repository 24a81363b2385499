#include "bcm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bcm/error.hpp"

namespace bcm {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit_line: size mismatch");
  LineFit f;
  f.points = static_cast<int>(x.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (x.size() < 2) {
    f.slope = f.intercept = f.r2 = f.rms = nan;
    return f;
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.slope = sxx > 0 ? sxy / sxx : nan;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  f.r2 = syy > 0 ? 1.0 - ss / syy : 1.0;
  return f;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "spearman: need two equally sized samples");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

DoubleLogFit fit_double_log(std::span<const double> delta, std::span<const double> err) {
  require(delta.size() == err.size(), "fit_double_log: size mismatch");
  DoubleLogFit out;
  out.residuals.assign(delta.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> x, y;
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (!(delta[i] > 0.0 && delta[i] < std::exp(-1.0) && err[i] > 0.0)) continue;
    x.push_back(std::log(std::log(std::abs(std::log(delta[i])))));
    y.push_back(std::log(err[i]));
    used.push_back(i);
  }
  out.points = static_cast<int>(x.size());
  const LineFit f = fit_line(x, y);
  out.alpha = -f.slope;
  out.c = std::exp(f.intercept);
  out.rms = f.rms;
  for (std::size_t k = 0; k < used.size(); ++k) out.residuals[used[k]] = y[k] - (f.slope * x[k] + f.intercept);
  return out;
}

}  // namespace bcm
