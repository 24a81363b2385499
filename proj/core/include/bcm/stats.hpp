#pragma once

#include <span>
#include <vector>

namespace bcm {

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  double rms = 0;  // root mean square residual
  int points = 0;
};

/// Ordinary least squares y = slope x + intercept; NaN slope for fewer than two points.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct DoubleLogFit {
  double c = 0;      // err ~ c / (log|log delta|)^alpha
  double alpha = 0;
  double rms = 0;    // rms residual in log err
  std::vector<double> residuals;  // per input pair; NaN where the pair was not usable
  int points = 0;
};

/// Fit of err = C / (log|log delta|)^alpha in log space over pairs with
/// 0 < delta < 1/e and err > 0.
DoubleLogFit fit_double_log(std::span<const double> delta, std::span<const double> err);

}  // namespace bcm
