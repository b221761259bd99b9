#include "bks/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bks/errors.hpp"
#include "bks/estimators.hpp"
#include "bks/numeric.hpp"

namespace bks {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0) || !(delta < 0.5)) {
    throw std::domain_error(
        "confidence delta must lie in (0, 0.5), got " + std::to_string(delta));
  }
}

void check_draws(int draws) {
  if (draws < 1) {
    throw std::invalid_argument("draw count must be at least 1");
  }
}

void require_exponential(const BottomKSketch& sketch) {
  if (sketch.family != RankFamily::exponential) {
    throw capability_error(
        std::string("these bounds require exponential ranks, sketch uses "
                    "family '") +
        family_name(sketch.family) + "'");
  }
}

double checked_total(const BottomKSketch& sketch, double total_weight) {
  if (!(total_weight > 0.0) || !std::isfinite(total_weight)) {
    throw std::invalid_argument("total weight must be positive and finite");
  }
  const double retained = sketch.retained_weight();
  if (total_weight < retained * (1.0 - 1e-12)) {
    throw std::invalid_argument("total weight " + std::to_string(total_weight) +
                                " is below the retained weight " +
                                std::to_string(retained));
  }
  return std::max(total_weight, retained);
}

double mean_v(std::span<const double> sums, double x) {
  double acc = 0.0;
  for (double s : sums) acc += 1.0 / (x - s);
  return acc;
}

double var_v(std::span<const double> sums, double x) {
  double acc = 0.0;
  for (double s : sums) {
    const double u = 1.0 / (x - s);
    acc += u * u;
  }
  return acc;
}

// Doubles the offset from `pole` until f drops below `target`; f must be
// eventually decreasing towards a limit below target.
template <class F>
std::optional<double> expand_below(F& f, double pole, double start_off,
                                   double target) {
  double off = start_off;
  for (int i = 0; i < 1100; ++i) {
    const double x = pole + off;
    if (!std::isfinite(x)) return std::nullopt;
    if (f(x) < target) return x;
    off *= 2.0;
  }
  return std::nullopt;
}

// Root of mean + alpha*sqrt(var) = tau above the last prefix sum.  The curve
// decreases from +inf to 0, so a root exists whenever tau > 0.
template <class Curve>
std::optional<double> solve_decreasing_curve(Curve f, double pole,
                                             double scale, double tau) {
  auto hi = expand_below(f, pole, scale, tau);
  if (!hi) return std::nullopt;
  return solve_decreasing(f, pole, *hi, tau);
}

std::optional<double> solve_upper_side(std::span<const double> sums,
                                       double tau, double alpha) {
  const double pole = sums.back();
  const double n = static_cast<double>(sums.size());
  auto f = [&sums, alpha](double x) {
    return mean_v(sums, x) + alpha * std::sqrt(var_v(sums, x));
  };
  return solve_decreasing_curve(f, pole, (n + alpha * std::sqrt(n)) / tau, tau);
}

// Lower side solves mean - alpha*sqrt(var) = tau.  The curve is monotone
// decreasing when alpha <= 1; for alpha > 1 it is negative up to the point
// where mean/sqrt(var) = alpha, then rises to a single peak and falls back
// to 0, so the root on the decreasing branch is the meaningful one.  The
// ratio mean/sqrt(var) grows monotonically from 1 to sqrt(h+1), hence no
// root exists at all once alpha^2 >= h+1.
std::optional<double> solve_lower_side(std::span<const double> sums,
                                       double tau, double alpha) {
  const double pole = sums.back();
  const double n = static_cast<double>(sums.size());
  auto g = [&sums, alpha](double x) {
    return mean_v(sums, x) - alpha * std::sqrt(var_v(sums, x));
  };
  if (alpha < 1.0 - 1e-12) {
    return solve_decreasing_curve(g, pole, n / tau, tau);
  }
  if (alpha <= 1.0 + 1e-12) {
    // At the pole the dominant terms cancel and g tends to the finite limit
    // sum_{j<h} 1/(s_h - s_j).
    if (sums.size() == 1) return std::nullopt;
    const double limit = mean_v(sums.first(sums.size() - 1), pole);
    if (!(limit > tau)) return std::nullopt;
    return solve_decreasing_curve(g, pole, n / tau, tau);
  }
  if (alpha * alpha >= n * (1.0 - 1e-12)) return std::nullopt;
  auto ratio = [&sums](double x) {
    return mean_v(sums, x) / std::sqrt(var_v(sums, x));
  };
  double off = n / tau;
  for (int i = 0; i < 1100 && ratio(pole + off) <= alpha; ++i) off *= 2.0;
  if (!(ratio(pole + off) > alpha)) return std::nullopt;
  const double x0 = solve_increasing(ratio, pole, pole + off, alpha);
  // Bracket past the peak: g rises from ~0 at x0, peaks, then decays to 0.
  double hi = x0 + (x0 - pole) + n / tau;
  double prev = g(hi);
  for (int i = 0; i < 1100; ++i) {
    const double next = 2.0 * hi - x0;
    if (!std::isfinite(next)) return std::nullopt;
    const double cur = g(next);
    const bool past_peak = cur < prev;
    hi = next;
    prev = cur;
    if (past_peak && cur < tau) break;
  }
  double lo = x0;
  double hi2 = hi;
  for (int i = 0; i < 200 && hi2 - lo > 1e-13 * (std::abs(hi2) + 1.0); ++i) {
    const double m1 = lo + (hi2 - lo) / 3.0;
    const double m2 = hi2 - (hi2 - lo) / 3.0;
    if (g(m1) < g(m2)) {
      lo = m1;
    } else {
      hi2 = m2;
    }
  }
  const double peak = 0.5 * (lo + hi2);
  if (!(g(peak) > tau)) return std::nullopt;
  return solve_decreasing(g, peak, hi, tau);
}

// Root of sum_j coeffs[j]/(x - sums[j]) = tau; lies in
// (sums.back(), sums.back() + sum(coeffs)/tau].
double solve_weighted_v_root(std::span<const double> sums,
                             std::span<const double> coeffs, double tau) {
  const double pole = sums.back();
  double total = 0.0;
  for (double c : coeffs) total += c;
  auto f = [&sums, &coeffs](double x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < sums.size(); ++j) {
      acc += coeffs[j] / (x - sums[j]);
    }
    return acc;
  };
  const double hi = pole + (total / tau) * (1.0 + 1e-9) + 1e-300;
  return solve_decreasing(f, pole, hi, tau);
}

std::vector<double> collect_sorted_roots(
    const std::function<double(SplitRng&)>& root_of_draw, int draws,
    SplitRng& rng) {
  SplitRng base = rng.split(rng.next_u64());
  std::vector<double> roots(static_cast<std::size_t>(draws));
  for (int i = 0; i < draws; ++i) {
    SplitRng sub = base.split(static_cast<std::uint64_t>(i));
    try {
      roots[static_cast<std::size_t>(i)] = root_of_draw(sub);
    } catch (const std::exception& e) {
      throw std::runtime_error("quantile draw " + std::to_string(i + 1) +
                               ": " + e.what());
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

double order_stat(const std::vector<double>& sorted, double p) {
  const int m = static_cast<int>(sorted.size());
  const int idx = std::clamp(
      static_cast<int>(std::ceil(p * static_cast<double>(m))), 1, m);
  return sorted[static_cast<std::size_t>(idx - 1)];
}

// Prefix sums 0, w_1, w_1+w_2, ..., including the grand total as the last
// element (n+1 values for n weights).
std::vector<double> closed_prefix_sums(const std::vector<double>& weights) {
  std::vector<double> sums;
  sums.reserve(weights.size() + 1);
  sums.push_back(0.0);
  double acc = 0.0;
  for (double w : weights) {
    acc += w;
    sums.push_back(acc);
  }
  return sums;
}

ConfidenceInterval finish_interval(double lower, double upper, double delta,
                                   std::string method, double floor,
                                   double cap) {
  ConfidenceInterval out;
  out.delta = delta;
  out.method = std::move(method);
  out.upper = std::clamp(upper, floor, cap);
  out.lower = std::clamp(lower, floor, out.upper);
  return out;
}

}  // namespace

double sample_sum_exp(const SumExpSpec& spec,
                      std::span<const double> uniforms) {
  if (spec.prefix_sums.empty()) {
    throw std::invalid_argument("prefix sums must be nonempty");
  }
  if (uniforms.size() != spec.prefix_sums.size()) {
    throw std::invalid_argument(
        "need exactly one uniform per prefix sum, got " +
        std::to_string(uniforms.size()) + " for " +
        std::to_string(spec.prefix_sums.size()));
  }
  if (!(spec.t > spec.prefix_sums.back())) {
    throw std::domain_error("rate anchor must exceed the largest prefix sum");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < uniforms.size(); ++j) {
    const double u = uniforms[j];
    if (!(u > 0.0) || !(u < 1.0)) {
      throw std::domain_error("uniforms must lie strictly inside (0, 1)");
    }
    acc += -std::log(u) / (spec.t - spec.prefix_sums[j]);
  }
  return acc;
}

std::optional<double> solve_normal_approx(std::span<const double> prefix_sums,
                                          double tau, double delta,
                                          BoundSide side) {
  if (prefix_sums.empty()) {
    throw std::invalid_argument("prefix sums must be nonempty");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::domain_error("threshold rank must be positive and finite");
  }
  check_delta(delta);
  const double alpha = inverse_normal_cdf(1.0 - delta);
  return side == BoundSide::upper ? solve_upper_side(prefix_sums, tau, alpha)
                                  : solve_lower_side(prefix_sums, tau, alpha);
}

double quantile_method_solve(
    const std::function<double(SplitRng&)>& root_of_draw, double delta,
    int draws, SplitRng& rng) {
  if (!root_of_draw) {
    throw std::invalid_argument("root solver must be callable");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::domain_error("quantile level must lie in (0, 1)");
  }
  check_draws(draws);
  const std::vector<double> roots =
      collect_sorted_roots(root_of_draw, draws, rng);
  return order_stat(roots, delta);
}

const char* ws_bound_method_name(WsBoundMethod method) {
  switch (method) {
    case WsBoundMethod::normal:
      return "normal";
    case WsBoundMethod::quantile:
      return "quantile";
    case WsBoundMethod::density:
      return "density";
  }
  throw std::invalid_argument("unknown bound method");
}

WsBoundMethod ws_bound_method_from_name(std::string_view name) {
  if (name == "normal") return WsBoundMethod::normal;
  if (name == "quantile") return WsBoundMethod::quantile;
  if (name == "density") return WsBoundMethod::density;
  throw std::invalid_argument("unknown bound method '" + std::string(name) +
                              "' (expected normal, quantile, or density)");
}

ConfidenceInterval ws_bounds_total(const BottomKSketch& sketch, double delta,
                                   WsBoundMethod method, SplitRng* rng,
                                   int draws) {
  sketch.validate();
  require_exponential(sketch);
  check_delta(delta);
  const double ws = sketch.retained_weight();
  if (sketch.exact()) {
    return {ws, ws, delta, "exact"};
  }
  const double tau = *sketch.r_k_plus_1;
  std::vector<double> weights;
  weights.reserve(sketch.entries.size());
  for (const auto& e : sketch.entries) weights.push_back(e.weight);
  const std::vector<double> sums = closed_prefix_sums(weights);
  const double inf = std::numeric_limits<double>::infinity();
  switch (method) {
    case WsBoundMethod::normal: {
      const auto up = solve_normal_approx(sums, tau, delta, BoundSide::upper);
      const auto low = solve_normal_approx(sums, tau, delta, BoundSide::lower);
      return finish_interval(low.value_or(ws), up.value_or(ws), delta,
                             "ws-normal", ws, inf);
    }
    case WsBoundMethod::quantile: {
      if (rng == nullptr) {
        throw std::invalid_argument(
            "the quantile method needs a random-number generator");
      }
      check_draws(draws);
      auto root_of_draw = [&sums, tau](SplitRng& r) {
        std::vector<double> coeffs(sums.size());
        for (double& c : coeffs) c = r.exponential(1.0);
        return solve_weighted_v_root(sums, coeffs, tau);
      };
      const std::vector<double> roots =
          collect_sorted_roots(root_of_draw, draws, *rng);
      return finish_interval(order_stat(roots, delta),
                             order_stat(roots, 1.0 - delta), delta,
                             "ws-quantile", ws, inf);
    }
    case WsBoundMethod::density: {
      // Conditioned on the retained set, the threshold rank has distribution
      // function G(ell) at tau, with ell the unseen weight; invert G over
      // ell at delta and 1 - delta.
      auto cdf_at_tau = [&weights, tau](double ell) {
        return f_subset_prob_upto(weights, ell, tau) /
               f_subset_prob(weights, ell);
      };
      auto invert = [&](double target) -> std::optional<double> {
        double hi = 1.0 / tau;
        for (int i = 0; i < 1100 && cdf_at_tau(hi) <= target; ++i) hi *= 2.0;
        if (!(cdf_at_tau(hi) > target)) return std::nullopt;
        return solve_increasing(cdf_at_tau, 0.0, hi, target);
      };
      const auto ell_up = invert(1.0 - delta);
      const auto ell_low = invert(delta);
      return finish_interval(ws + ell_low.value_or(0.0),
                             ws + ell_up.value_or(0.0), delta, "ws-density",
                             ws, inf);
    }
  }
  throw std::invalid_argument("unknown bound method");
}

ConfidenceInterval ws_bounds_subpop(const BottomKSketch& sketch,
                                    const Predicate& predicate, double delta,
                                    WsBoundMethod method, SplitRng* rng,
                                    int draws) {
  sketch.validate();
  require_exponential(sketch);
  check_delta(delta);
  if (method == WsBoundMethod::density) {
    throw capability_error(
        "the density method applies to total-weight bounds only");
  }
  std::vector<double> matched;
  for (const auto& e : sketch.entries) {
    if (predicate.matches(e)) matched.push_back(e.weight);
  }
  const double floor =
      std::accumulate(matched.begin(), matched.end(), 0.0);
  if (sketch.exact()) {
    return {floor, floor, delta, "exact"};
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double tau_up = *sketch.r_k_plus_1;
  const double tau_low = sketch.entries.back().rank;
  const std::vector<double> upper_sums = closed_prefix_sums(matched);
  std::vector<double> lower_sums = upper_sums;
  lower_sums.pop_back();  // s_0 .. s_{c-1}
  if (method == WsBoundMethod::normal) {
    const auto up = solve_normal_approx(upper_sums, tau_up, delta,
                                        BoundSide::upper);
    double low = 0.0;
    if (!matched.empty()) {
      const auto root =
          solve_normal_approx(lower_sums, tau_low, delta, BoundSide::lower);
      low = std::max(floor, root.value_or(floor));
    }
    return finish_interval(low, up.value_or(floor), delta, "ws-normal", 0.0,
                           inf);
  }
  if (rng == nullptr) {
    throw std::invalid_argument(
        "the quantile method needs a random-number generator");
  }
  check_draws(draws);
  auto root_lambda = [](const std::vector<double>* sums, double tau) {
    return [sums, tau](SplitRng& r) {
      std::vector<double> coeffs(sums->size());
      for (double& c : coeffs) c = r.exponential(1.0);
      return solve_weighted_v_root(*sums, coeffs, tau);
    };
  };
  const double upper = order_stat(
      collect_sorted_roots(root_lambda(&upper_sums, tau_up), draws, *rng),
      1.0 - delta);
  double lower = 0.0;
  if (!matched.empty()) {
    const double root = order_stat(
        collect_sorted_roots(root_lambda(&lower_sums, tau_low), draws, *rng),
        delta);
    lower = std::max(floor, root);
  }
  return finish_interval(lower, upper, delta, "ws-quantile", 0.0, inf);
}

namespace {

// One Monte-Carlo inversion of the lexicographic observation (matched count,
// max-rank difference): given fresh exponential coefficients for the matched
// and unmatched rank-gap chains, finds the candidate subpopulation weight x
// whose simulated observation reproduces the observed one.  Phase 1 computes
// the range (L, U) where the simulated matched count equals the observed
// one, phase 2 searches the monotone gap difference for the observed Delta,
// phase 3 truncates to the feasible weight range.
double lex_solver_draw(const std::vector<double>& ms,
                       const std::vector<double>& us, double W, double delta_r,
                       SplitRng& rng) {
  const std::size_t c = ms.size() - 1;   // matched sketch entries
  const std::size_t a = us.size() - 1;   // unmatched sketch entries
  std::vector<double> e(c + 1);
  std::vector<double> ep(a + 1);
  for (double& v : e) v = rng.exponential(1.0);
  for (double& v : ep) v = rng.exponential(1.0);
  auto chain_a = [&](std::size_t m, double x) {
    double acc = 0.0;
    for (std::size_t h = 0; h < m; ++h) acc += e[h] / (x - ms[h]);
    return acc;
  };
  auto chain_b = [&](std::size_t m, double x) {
    double acc = 0.0;
    for (std::size_t h = 0; h < m; ++h) acc += ep[h] / (W - x - us[h]);
    return acc;
  };
  const double x_min = ms.back();      // weight of the matched entries
  const double x_max = W - us.back();  // W minus the unmatched entry weight
  const double cap = std::max(x_min, x_max);
  double L = 0.0;
  if (c > 0) {
    const double lo = ms[c - 1];
    if (lo < x_max) {
      auto f = [&](double x) { return chain_a(c, x) - chain_b(a + 1, x); };
      L = solve_decreasing(f, lo, x_max, 0.0);
    } else {
      L = x_max;
    }
  }
  double U = W;
  if (a > 0) {
    const double hi = W - us[a - 1];
    if (x_min < hi) {
      auto f = [&](double x) { return chain_a(c + 1, x) - chain_b(a, x); };
      U = solve_decreasing(f, x_min, hi, 0.0);
    } else {
      U = x_min;
    }
  }
  double x;
  if (L < U) {
    auto d = [&](double y) { return chain_b(a, y) - chain_a(c, y); };
    x = solve_increasing(d, L, U, delta_r);
  } else {
    x = L;
  }
  return std::clamp(x, x_min, cap);
}

}  // namespace

ConfidenceInterval ws_bounds_subpop_with_total(const BottomKSketch& sketch,
                                               const Predicate& predicate,
                                               double total_weight,
                                               double delta, int draws,
                                               SplitRng& rng) {
  sketch.validate();
  require_exponential(sketch);
  check_delta(delta);
  check_draws(draws);
  const double W = checked_total(sketch, total_weight);
  std::vector<double> matched;
  std::vector<double> unmatched;
  double max_matched_rank = 0.0;
  double max_unmatched_rank = 0.0;
  for (const auto& e : sketch.entries) {
    if (predicate.matches(e)) {
      matched.push_back(e.weight);
      max_matched_rank = e.rank;
    } else {
      unmatched.push_back(e.weight);
      max_unmatched_rank = e.rank;
    }
  }
  const double floor =
      std::accumulate(matched.begin(), matched.end(), 0.0);
  if (sketch.exact()) {
    return {floor, floor, delta, "exact"};
  }
  const double delta_r = max_unmatched_rank - max_matched_rank;
  const std::vector<double> ms = closed_prefix_sums(matched);
  const std::vector<double> us = closed_prefix_sums(unmatched);
  auto root_of_draw = [&](SplitRng& r) {
    return lex_solver_draw(ms, us, W, delta_r, r);
  };
  const std::vector<double> roots =
      collect_sorted_roots(root_of_draw, draws, rng);
  return finish_interval(order_stat(roots, delta),
                         order_stat(roots, 1.0 - delta), delta,
                         "ws-lex-quantile", 0.0, W);
}

ConfidenceInterval pri_bounds_subpop(const BottomKSketch& sketch,
                                     const Predicate& predicate,
                                     double delta) {
  sketch.validate();
  if (sketch.family != RankFamily::priority) {
    throw capability_error(
        std::string("these bounds require priority ranks, sketch uses "
                    "family '") +
        family_name(sketch.family) + "'");
  }
  check_delta(delta);
  KahanSum matched_weight;
  std::vector<double> small;
  double big = 0.0;
  int nprime = 0;
  const bool exact = sketch.exact();
  const double tau = exact ? 0.0 : *sketch.r_k_plus_1;
  for (const auto& e : sketch.entries) {
    if (!predicate.matches(e)) continue;
    matched_weight.add(e.weight);
    if (exact) continue;
    if (e.weight * tau >= 1.0) {
      big += e.weight;
    } else {
      ++nprime;
    }
  }
  if (exact) {
    const double w = matched_weight.value();
    return {w, w, delta, "exact"};
  }
  const double log_delta = std::log(delta);
  double upper_count;
  double lower_count = 0.0;
  if (nprime == 0) {
    upper_count = -log_delta;
  } else {
    const double np = static_cast<double>(nprime);
    auto log_phi = [np](double x) { return np - x + np * std::log(x / np); };
    double hi = 64.0 * np;
    for (int i = 0; i < 64 && log_phi(hi) > log_delta; ++i) hi *= 2.0;
    if (log_phi(hi) > log_delta) {
      throw std::domain_error("tail-bound bracketing failed");
    }
    upper_count = solve_decreasing(log_phi, np, hi, log_delta);
    lower_count = solve_increasing(log_phi, 1e-12, np, log_delta);
  }
  const double inf = std::numeric_limits<double>::infinity();
  return finish_interval(big + lower_count / tau, big + upper_count / tau,
                         delta, "pri-chernoff", 0.0, inf);
}

ConfidenceInterval wsr_bounds_total(const KMinsSketch& sketch, double delta) {
  sketch.validate();
  check_delta(delta);
  KahanSum rank_sum;
  for (const auto& e : sketch.mins) rank_sum.add(e.rank);
  const double rbar = rank_sum.value() / static_cast<double>(sketch.mins.size());
  const double alpha = inverse_normal_cdf(1.0 - delta);
  const double spread =
      alpha / std::sqrt(static_cast<double>(sketch.mins.size()));
  const double inf = std::numeric_limits<double>::infinity();
  return finish_interval(std::max(0.0, 1.0 - spread) / rbar,
                         (1.0 + spread) / rbar, delta, "wsr-normal", 0.0, inf);
}

}  // namespace bks
