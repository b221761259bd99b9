#include "bks/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bks {

namespace {

// Acklam's rational approximation to the normal quantile, ~1.15e-9 relative
// error; the Newton step below tightens it to near machine precision.
double acklam(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("inverse_normal_cdf requires p in (0,1)");
  }
  double x = acklam(p);
  // One Newton step against the exact CDF expressed through erfc.
  static const double inv_sqrt2 = 0.7071067811865475244;
  static const double sqrt_2pi = 2.5066282746310005024;
  double cdf = 0.5 * std::erfc(-x * inv_sqrt2);
  double pdf = std::exp(-0.5 * x * x) / sqrt_2pi;
  if (pdf > 0) x -= (cdf - p) / pdf;
  return x;
}

double log_sum_exp(std::span<const double> log_terms) {
  if (log_terms.empty()) return -std::numeric_limits<double>::infinity();
  double m = *std::max_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(m)) return m;
  double acc = 0;
  for (double t : log_terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

}  // namespace bks
