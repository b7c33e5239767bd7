#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wips {

/// Sample mean with its standard error.
struct MeanEstimate {
  std::size_t count = 0;
  double value = 0.0;
  double se = 0.0;
};

/// Unbiased sample variance with a normal-approximation 95% interval. The
/// standard error uses the fourth central moment, so it stays honest for
/// non-Gaussian samples.
struct VarianceEstimate {
  std::size_t count = 0;
  double value = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t count = 0;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Sequential left-to-right sum. Used for every reduction so results depend
/// only on element order.
double ordered_sum(std::span<const double> v) noexcept;
double mean(std::span<const double> v);
/// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double variance(std::span<const double> v);
MeanEstimate mean_estimate(std::span<const double> v);
VarianceEstimate variance_estimate(std::span<const double> v);
/// Sample covariance of paired samples (n - 1 normalisation).
double covariance(std::span<const double> a, std::span<const double> b);
/// Least-squares line y = intercept + slope * x.
Regression least_squares(std::span<const double> x, std::span<const double> y);

/// Binomial standard error sqrt(p (1 - p) / n).
double binomial_se(double p, std::size_t n);

}  // namespace wips
