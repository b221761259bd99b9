#pragma once

#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>

namespace bks {

// Quantile of the standard normal distribution, accurate to roughly 1e-13.
double inverse_normal_cdf(double p);

// Compensated accumulator for long alternating or ill-scaled sums.
struct KahanSum {
  double sum = 0;
  double carry = 0;

  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

double log_sum_exp(std::span<const double> log_terms);

// Root of f(x) = target on (lo, hi) for f monotone decreasing across the
// bracket.  Endpoints are never evaluated, so a pole at `lo` is fine; the
// caller guarantees f(lo+) >= target >= f(hi-).
template <class F>
double solve_decreasing(F&& f, double lo, double hi, double target,
                        double rel_tol = 1e-13, int max_iters = 200) {
  if (!(lo < hi)) throw std::domain_error("solve_decreasing: empty bracket");
  for (int i = 0; i < max_iters; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= rel_tol * (std::abs(lo) + std::abs(hi) + 1.0)) break;
  }
  return 0.5 * (lo + hi);
}

template <class F>
double solve_increasing(F&& f, double lo, double hi, double target,
                        double rel_tol = 1e-13, int max_iters = 200) {
  return solve_decreasing([&](double x) { return -f(x); }, lo, hi, -target,
                          rel_tol, max_iters);
}

namespace detail {

inline double simpson_slice(double a, double fa, double b, double fb,
                            double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(F& f, double a, double fa, double b, double fb,
                            double m, double fm, double whole, double tol,
                            int depth) {
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = f(lm);
  double frm = f(rm);
  double left = simpson_slice(a, fa, m, fm, flm);
  double right = simpson_slice(m, fm, b, fb, frm);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                              depth - 1);
}

}  // namespace detail

// Integral of f over [a, b] to the requested absolute tolerance.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol,
                        int max_depth = 55) {
  if (!(a < b)) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a);
  double fb = f(b);
  double fm = f(m);
  double whole = detail::simpson_slice(a, fa, b, fb, fm);
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, abs_tol,
                                      max_depth);
}

}  // namespace bks
