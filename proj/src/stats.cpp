#include "wips/stats.hpp"

#include <algorithm>
#include <cmath>

#include "wips/error.hpp"

namespace wips {

double ordered_sum(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double mean(std::span<const double> v) {
  require(!v.empty(), Error::Code::kInvalidArgument, "mean of an empty sample");
  return ordered_sum(v) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

MeanEstimate mean_estimate(std::span<const double> v) {
  MeanEstimate e;
  e.count = v.size();
  e.value = mean(v);
  e.se = std::sqrt(variance(v) / static_cast<double>(v.size()));
  return e;
}

VarianceEstimate variance_estimate(std::span<const double> v) {
  require(v.size() >= 4, Error::Code::kInvalidArgument, "variance estimate needs at least 4 values");
  const double n = static_cast<double>(v.size());
  const double m = mean(v);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double c = (x - m) * (x - m);
    m2 += c;
    m4 += c * c;
  }
  m2 /= n;
  m4 /= n;
  VarianceEstimate e;
  e.count = v.size();
  e.value = m2 * n / (n - 1.0);
  // Var(s^2) = (mu4 - sigma^4 (n - 3) / (n - 1)) / n
  const double var_s2 = (m4 - e.value * e.value * (n - 3.0) / (n - 1.0)) / n;
  e.se = std::sqrt(std::max(var_s2, 0.0));
  e.lo = e.value - kZ95 * e.se;
  e.hi = e.value + kZ95 * e.se;
  return e;
}

double covariance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, Error::Code::kInvalidArgument,
          "covariance needs two paired samples of size >= 2");
  const double ma = mean(a);
  const double mb = mean(b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - ma) * (b[k] - mb);
  return s / static_cast<double>(a.size() - 1);
}

Regression least_squares(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, Error::Code::kInvalidArgument,
          "regression needs at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  require(sxx > 0.0, Error::Code::kInvalidArgument, "regression abscissae are all equal");
  Regression r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.count = x.size();
  return r;
}

double binomial_se(double p, std::size_t n) {
  require(n > 0, Error::Code::kInvalidArgument, "binomial_se: n must be positive");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace wips
