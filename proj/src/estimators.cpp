#include "bks/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bks/errors.hpp"
#include "bks/numeric.hpp"
#include "bks/rank.hpp"
#include "bks/sketch.hpp"

namespace bks {

namespace {

constexpr double kTailCutoff = 35.0;  // exp(-35) ~ 6e-16, below all tolerances

void require_exponential(const BottomKSketch& sketch, const char* what) {
  if (sketch.family != RankFamily::exponential) {
    throw capability_error(std::string(what) +
                           " requires exponential ranks, sketch uses family '" +
                           family_name(sketch.family) + "'");
  }
}

double checked_total_weight(const BottomKSketch& sketch, double total_weight,
                            const char* what) {
  if (!(total_weight > 0.0) || !std::isfinite(total_weight)) {
    throw std::invalid_argument(std::string(what) +
                                ": total weight must be positive and finite");
  }
  const double retained = sketch.retained_weight();
  if (total_weight < retained * (1.0 - 1e-12)) {
    throw std::invalid_argument(
        std::string(what) + ": total weight " + std::to_string(total_weight) +
        " is below the retained weight " + std::to_string(retained));
  }
  return std::max(total_weight, retained);
}

std::vector<double> entry_weights(const BottomKSketch& sketch) {
  std::vector<double> w;
  w.reserve(sketch.entries.size());
  for (const auto& e : sketch.entries) w.push_back(e.weight);
  return w;
}

void check_subset_weights(std::span<const double> weights) {
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("subset weights must be positive and finite");
    }
  }
}

void check_ell(double ell) {
  if (std::isnan(ell) || ell < 0.0 || std::isinf(ell)) {
    throw std::domain_error("rate parameter must be finite and nonnegative");
  }
}

// Signed subset enumeration in gray-code order; `term` maps the current
// subset weight wT to its unsigned contribution.
template <typename Term>
long double signed_subset_sum(std::span<const double> weights, Term term) {
  const std::size_t n = weights.size();
  long double sum = term(0.0L);  // empty subset, positive sign
  long double wT = 0.0L;
  std::uint64_t gray = 0;
  int parity = 0;
  for (std::uint64_t m = 1; m < (std::uint64_t{1} << n); ++m) {
    const unsigned b = static_cast<unsigned>(std::countr_zero(m));
    const std::uint64_t bit = std::uint64_t{1} << b;
    gray ^= bit;
    if (gray & bit) {
      wT += weights[b];
      parity ^= 1;
    } else {
      wT -= weights[b];
      parity ^= 1;
    }
    const long double t = term(wT);
    sum += parity ? -t : t;
  }
  return sum;
}

// Integrates g over [a, b] split into dyadic panels so that localized
// features near the origin are not skipped by the adaptive rule.
double integrate_with_panels(const std::function<double(double)>& g, double b,
                             double feature_scale, double abs_tol) {
  std::vector<double> cuts;
  cuts.push_back(b);
  double x = b;
  while (x > feature_scale && cuts.size() < 128) {
    x *= 0.5;
    cuts.push_back(x);
  }
  cuts.push_back(0.0);
  std::reverse(cuts.begin(), cuts.end());
  const double panel_tol = abs_tol / static_cast<double>(cuts.size());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += adaptive_simpson(g, cuts[i], cuts[i + 1], panel_tol);
  }
  return total;
}

}  // namespace

const char* estimator_method_name(EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::ws_rc:
      return "ws-rc";
    case EstimatorMethod::pri_rc:
      return "pri-rc";
    case EstimatorMethod::ws_sc_exact:
      return "ws-sc";
    case EstimatorMethod::ws_sc_markov:
      return "ws-sc-markov";
    case EstimatorMethod::ws_prefix:
      return "ws-prefix";
  }
  throw std::invalid_argument("unknown estimator method");
}

AdjustedWeightAssignment rc_adjusted_weights(const BottomKSketch& sketch) {
  sketch.validate();
  if (sketch.family == RankFamily::uniform) {
    throw capability_error(
        "rank-conditioning weights are undefined for weight-oblivious "
        "uniform ranks");
  }
  AdjustedWeightAssignment out;
  out.method = sketch.family == RankFamily::exponential ? EstimatorMethod::ws_rc
                                                        : EstimatorMethod::pri_rc;
  out.uses_total_weight = false;
  out.entries = sketch.entries;
  out.adjusted.reserve(out.entries.size());
  if (sketch.exact()) {
    for (const auto& e : out.entries) out.adjusted.push_back(e.weight);
    return out;
  }
  const double r = *sketch.r_k_plus_1;
  for (const auto& e : out.entries) {
    if (sketch.family == RankFamily::exponential) {
      out.adjusted.push_back(e.weight / -std::expm1(-e.weight * r));
    } else {
      out.adjusted.push_back(std::max(e.weight, 1.0 / r));
    }
  }
  return out;
}

double f_subset_prob(std::span<const double> weights, double ell) {
  check_ell(ell);
  check_subset_weights(weights);
  if (weights.empty() || ell == 0.0) return 1.0;
  if (weights.size() > kSubsetConditioningExactCap) {
    return f_subset_prob_quadrature(weights, ell);
  }
  const long double l = ell;
  const long double sum = signed_subset_sum(
      weights, [l](long double wT) { return l / (l + wT); });
  return std::clamp(static_cast<double>(sum), 0.0, 1.0);
}

double f_subset_prob_quadrature(std::span<const double> weights, double ell,
                                double abs_tol) {
  check_ell(ell);
  check_subset_weights(weights);
  if (weights.empty() || ell == 0.0) return 1.0;
  const double cutoff = kTailCutoff / ell;
  const double wmax = *std::max_element(weights.begin(), weights.end());
  std::function<double(double)> g = [&weights, ell](double x) {
    double prod = ell * std::exp(-ell * x);
    for (double w : weights) prod *= -std::expm1(-w * x);
    return prod;
  };
  const double val =
      integrate_with_panels(g, cutoff, 0.5 / std::max(wmax, ell), abs_tol);
  return std::clamp(val, 0.0, 1.0);
}

double f_subset_prob_upto(std::span<const double> weights, double ell,
                          double y) {
  check_ell(ell);
  check_subset_weights(weights);
  if (std::isnan(y)) throw std::domain_error("upper limit must not be NaN");
  if (y <= 0.0 || ell == 0.0) return 0.0;
  if (weights.size() <= kSubsetConditioningExactCap) {
    const long double l = ell;
    const long double yl = y;
    const long double sum =
        signed_subset_sum(weights, [l, yl](long double wT) {
          const long double rate = l + wT;
          return -std::expm1l(-rate * yl) * l / rate;
        });
    return std::clamp(static_cast<double>(sum), 0.0, 1.0);
  }
  const double cutoff = std::min(y, kTailCutoff / ell);
  const double wmax = *std::max_element(weights.begin(), weights.end());
  std::function<double(double)> g = [&weights, ell](double x) {
    double prod = ell * std::exp(-ell * x);
    for (double w : weights) prod *= -std::expm1(-w * x);
    return prod;
  };
  const double val =
      integrate_with_panels(g, cutoff, 0.5 / std::max(wmax, ell), 1e-12);
  return std::clamp(val, 0.0, 1.0);
}

AdjustedWeightAssignment sc_adjusted_weights_exact(const BottomKSketch& sketch,
                                                   double total_weight) {
  sketch.validate();
  require_exponential(sketch, "subset conditioning");
  const double W =
      checked_total_weight(sketch, total_weight, "subset conditioning");
  AdjustedWeightAssignment out;
  out.method = EstimatorMethod::ws_sc_exact;
  out.uses_total_weight = true;
  out.entries = sketch.entries;
  if (sketch.exact()) {
    for (const auto& e : out.entries) out.adjusted.push_back(e.weight);
    return out;
  }
  const std::size_t k = out.entries.size();
  if (k > kSubsetConditioningExactCap) {
    throw capability_error(
        "exact subset conditioning enumerates 2^k subsets and is limited to "
        "k <= " +
        std::to_string(kSubsetConditioningExactCap) + ", got k = " +
        std::to_string(k) + "; use the Markov approximation instead");
  }
  const std::vector<double> weights = entry_weights(sketch);
  const double ell = std::max(0.0, W - sketch.retained_weight());
  const double denom = f_subset_prob(weights, ell);
  if (!(denom > 0.0)) {
    throw std::domain_error(
        "subset conditioning: retained-set probability underflowed to zero");
  }
  out.adjusted.reserve(k);
  std::vector<double> rest(weights.size() - 1);
  for (std::size_t i = 0; i < k; ++i) {
    rest.clear();
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) rest.push_back(weights[j]);
    }
    const double fi = f_subset_prob(rest, ell);
    out.adjusted.push_back(weights[i] * fi / denom);
  }
  return out;
}

AdjustedWeightAssignment sc_adjusted_weights_markov(const BottomKSketch& sketch,
                                                    double total_weight,
                                                    const MarkovParams& params,
                                                    SplitRng& rng) {
  sketch.validate();
  require_exponential(sketch, "subset conditioning");
  const double W =
      checked_total_weight(sketch, total_weight, "subset conditioning");
  if (params.permnum < 1 || params.inperm < 1) {
    throw std::invalid_argument(
        "Markov subset conditioning needs at least one permutation step and "
        "one draw per step");
  }
  AdjustedWeightAssignment out;
  out.method = EstimatorMethod::ws_sc_markov;
  out.uses_total_weight = true;
  out.entries = sketch.entries;
  if (sketch.exact()) {
    for (const auto& e : out.entries) out.adjusted.push_back(e.weight);
    return out;
  }
  const std::size_t k = out.entries.size();
  std::vector<KahanSum> accum(k);
  std::vector<double> cur_ranks;
  cur_ranks.reserve(k);
  for (const auto& e : out.entries) cur_ranks.push_back(e.rank);
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  auto sort_perm = [&] {
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
      return rank_less(cur_ranks[a], out.entries[a].id, cur_ranks[b],
                       out.entries[b].id);
    });
  };
  sort_perm();
  for (int step = 0; step < params.permnum; ++step) {
    // Rates of the successive rank gaps under this permutation: the j-th gap
    // is exponential with rate W minus the weight of the first j items.
    std::vector<double> rates(k + 1);
    double prefix = 0.0;
    rates[0] = W;
    for (std::size_t j = 0; j < k; ++j) {
      prefix += out.entries[perm[j]].weight;
      rates[j + 1] = std::max(0.0, W - prefix);
    }
    double last_threshold = 0.0;
    for (int d = 0; d < params.inperm; ++d) {
      double threshold = 0.0;
      for (double rate : rates) threshold += rng.exponential(rate);
      last_threshold = threshold;
      for (std::size_t i = 0; i < k; ++i) {
        const double w = out.entries[i].weight;
        const double a =
            std::isinf(threshold) ? w : w / -std::expm1(-w * threshold);
        accum[i].add(a);
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      cur_ranks[i] = redraw_rank_below(RankFamily::exponential,
                                       out.entries[i].weight, last_threshold,
                                       rng);
    }
    sort_perm();
  }
  const double draws =
      static_cast<double>(params.permnum) * static_cast<double>(params.inperm);
  out.adjusted.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.adjusted.push_back(accum[i].value() / draws);
  }
  return out;
}

AdjustedWeightAssignment prefix_adjusted_weights(const BottomKSketch& sketch,
                                                 double total_weight) {
  sketch.validate();
  require_exponential(sketch, "prefix conditioning");
  const double W =
      checked_total_weight(sketch, total_weight, "prefix conditioning");
  AdjustedWeightAssignment out;
  out.method = EstimatorMethod::ws_prefix;
  out.uses_total_weight = true;
  out.entries = sketch.entries;
  if (sketch.exact()) {
    for (const auto& e : out.entries) out.adjusted.push_back(e.weight);
    return out;
  }
  const std::size_t k = out.entries.size();
  out.adjusted.reserve(k);
  std::vector<double> others;
  std::vector<double> prefix_log_a;   // prefix_log_a[j] = sum_{m<j} log A_m
  std::vector<double> suffix_log_b;   // suffix_log_b[j] = sum_{m>=j} log B_m
  std::vector<double> others_prefix;  // others_prefix[m] = u_1 + .. + u_m
  std::vector<double> log_p;
  for (std::size_t pos = 0; pos < k; ++pos) {
    const double wi = out.entries[pos].weight;
    others.clear();
    for (std::size_t j = 0; j < k; ++j) {
      if (j != pos) others.push_back(out.entries[j].weight);
    }
    const std::size_t m = others.size();  // k - 1
    others_prefix.assign(m + 1, 0.0);
    for (std::size_t t = 0; t < m; ++t) {
      others_prefix[t + 1] = others_prefix[t] + others[t];
    }
    // A_t: probability factor for the t-th other item appearing next among
    // all unseen items; B_t: the same with item `pos` excluded from the pool.
    prefix_log_a.assign(m + 2, 0.0);
    for (std::size_t t = 1; t <= m; ++t) {
      prefix_log_a[t + 1] = prefix_log_a[t] + std::log(others[t - 1]) -
                            std::log(W - others_prefix[t - 1]);
    }
    suffix_log_b.assign(m + 2, 0.0);
    for (std::size_t t = m; t >= 1; --t) {
      suffix_log_b[t] = suffix_log_b[t + 1] + std::log(others[t - 1]) -
                        std::log(W - wi - others_prefix[t - 1]);
    }
    // Insertion slot j = 1..k: item `pos` is the j-th sketch entry, the
    // first j-1 others come before it and the rest after it.
    log_p.clear();
    for (std::size_t j = 1; j <= k; ++j) {
      log_p.push_back(prefix_log_a[j] + std::log(wi) -
                      std::log(W - others_prefix[j - 1]) + suffix_log_b[j]);
    }
    const double log_in = log_sum_exp(log_p);
    const double ell = W - (others_prefix[m] + wi);
    double log_all = log_in;
    if (ell > 0.0) {
      const double log_out = prefix_log_a[m + 1] + std::log(ell) -
                             std::log(W - others_prefix[m]);
      log_p.push_back(log_out);
      log_all = log_sum_exp(log_p);
    }
    out.adjusted.push_back(wi * std::exp(log_all - log_in));
  }
  return out;
}

double estimate_subpop(const AdjustedWeightAssignment& assignment,
                       const Predicate& predicate) {
  if (assignment.entries.size() != assignment.adjusted.size()) {
    throw std::invalid_argument(
        "adjusted-weight assignment entries and values differ in length");
  }
  KahanSum sum;
  for (std::size_t i = 0; i < assignment.entries.size(); ++i) {
    if (predicate.matches(assignment.entries[i])) {
      sum.add(assignment.adjusted[i]);
    }
  }
  return sum.value();
}

double estimate_value_sum(const AdjustedWeightAssignment& assignment,
                          const Predicate& predicate,
                          const std::function<double(const SketchEntry&)>& h) {
  if (!h) throw std::invalid_argument("value function must be callable");
  if (assignment.entries.size() != assignment.adjusted.size()) {
    throw std::invalid_argument(
        "adjusted-weight assignment entries and values differ in length");
  }
  KahanSum sum;
  for (std::size_t i = 0; i < assignment.entries.size(); ++i) {
    const auto& e = assignment.entries[i];
    if (predicate.matches(e)) {
      sum.add(h(e) * assignment.adjusted[i] / e.weight);
    }
  }
  return sum.value();
}

namespace {

// Root of sum_h 1/(x - s_h) = tau over x > s_{m-1}, where s holds the m
// prefix sums; the root lies in [s_{m-1} + 1/tau, s_{m-1} + m/tau].
double solve_harmonic_equation(std::span<const double> prefix_sums,
                               double tau) {
  const std::size_t m = prefix_sums.size();
  const double last = prefix_sums.back();
  if (m == 1) return last + 1.0 / tau;
  auto f = [&prefix_sums](double x) {
    double acc = 0.0;
    for (double s : prefix_sums) acc += 1.0 / (x - s);
    return acc;
  };
  return solve_decreasing(f, last + 1.0 / tau,
                          last + static_cast<double>(m) / tau, tau);
}

std::vector<double> prefix_sums_of(std::span<const double> weights) {
  std::vector<double> sums(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    sums[i] = acc;
    acc += weights[i];
  }
  return sums;
}

struct MlOrdering {
  std::vector<double> matched;    // matched entry weights in rank order
  std::vector<double> unmatched;  // the rest in rank order
};

MlOrdering ml_ordering(const BottomKSketch& sketch, const Predicate& predicate,
                       const std::vector<double>* ranks) {
  std::vector<std::size_t> order(sketch.entries.size());
  std::iota(order.begin(), order.end(), 0);
  if (ranks) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return rank_less((*ranks)[a], sketch.entries[a].id, (*ranks)[b],
                       sketch.entries[b].id);
    });
  }
  MlOrdering out;
  for (std::size_t idx : order) {
    const auto& e = sketch.entries[idx];
    (predicate.matches(e) ? out.matched : out.unmatched).push_back(e.weight);
  }
  return out;
}

void check_redraws(int redraws, SplitRng* rng) {
  if (redraws < 0) {
    throw std::invalid_argument("redraw count must be nonnegative");
  }
  if (redraws > 0 && rng == nullptr) {
    throw std::invalid_argument(
        "redraw averaging needs a random-number generator");
  }
}

// Averages `solve` over `redraws` resampled rank orderings, or evaluates the
// observed ordering when redraws == 0.
template <typename Solve>
double ml_average(const BottomKSketch& sketch, int redraws, SplitRng* rng,
                  Solve solve) {
  if (redraws == 0) return solve(nullptr);
  KahanSum sum;
  std::vector<double> ranks(sketch.entries.size());
  for (int rep = 0; rep < redraws; ++rep) {
    for (std::size_t i = 0; i < sketch.entries.size(); ++i) {
      ranks[i] = redraw_rank_below(sketch.family, sketch.entries[i].weight,
                                   *sketch.r_k_plus_1, *rng);
    }
    sum.add(solve(&ranks));
  }
  return sum.value() / redraws;
}

}  // namespace

double ml_total_weight(const BottomKSketch& sketch, int redraws,
                       SplitRng* rng) {
  sketch.validate();
  require_exponential(sketch, "maximum-likelihood estimation");
  check_redraws(redraws, rng);
  if (sketch.exact()) return sketch.retained_weight();
  const double tau = *sketch.r_k_plus_1;
  auto solve = [&](const std::vector<double>* ranks) {
    const MlOrdering ord = ml_ordering(sketch, Predicate(), ranks);
    std::vector<double> sums = prefix_sums_of(ord.matched);
    sums.push_back(sums.back() + ord.matched.back());  // s_0 .. s_k
    return solve_harmonic_equation(sums, tau);
  };
  return ml_average(sketch, redraws, rng, solve);
}

double ml_subpop(const BottomKSketch& sketch, const Predicate& predicate,
                 int redraws, SplitRng* rng) {
  sketch.validate();
  require_exponential(sketch, "maximum-likelihood estimation");
  check_redraws(redraws, rng);
  KahanSum matched_weight;
  for (const auto& e : sketch.entries) {
    if (predicate.matches(e)) matched_weight.add(e.weight);
  }
  const double floor = matched_weight.value();
  if (sketch.exact()) return floor;
  const double tau = *sketch.r_k_plus_1;
  auto solve = [&](const std::vector<double>* ranks) {
    const MlOrdering ord = ml_ordering(sketch, predicate, ranks);
    if (ord.matched.empty()) return 0.0;
    const std::vector<double> sums = prefix_sums_of(ord.matched);
    return std::max(solve_harmonic_equation(sums, tau), floor);
  };
  return ml_average(sketch, redraws, rng, solve);
}

double ml_subpop_with_total(const BottomKSketch& sketch,
                            const Predicate& predicate, double total_weight,
                            int redraws, SplitRng* rng) {
  sketch.validate();
  require_exponential(sketch, "maximum-likelihood estimation");
  const double W = checked_total_weight(sketch, total_weight,
                                        "maximum-likelihood estimation");
  check_redraws(redraws, rng);
  if (sketch.exact()) {
    KahanSum matched_weight;
    for (const auto& e : sketch.entries) {
      if (predicate.matches(e)) matched_weight.add(e.weight);
    }
    return matched_weight.value();
  }
  auto solve = [&](const std::vector<double>* ranks) {
    const MlOrdering ord = ml_ordering(sketch, predicate, ranks);
    if (ord.matched.empty()) return 0.0;
    if (ord.unmatched.empty()) return W;
    const std::vector<double> ms = prefix_sums_of(ord.matched);
    const std::vector<double> us = prefix_sums_of(ord.unmatched);
    auto g = [&](double x) {
      double acc = 0.0;
      for (double s : ms) acc += 1.0 / (x - s);
      for (double s : us) acc -= 1.0 / ((W - x) - s);
      return acc;
    };
    return solve_decreasing(g, ms.back(), W - us.back(), 0.0);
  };
  return ml_average(sketch, redraws, rng, solve);
}

WsrTotalEstimates wsr_total_weight(const KMinsSketch& sketch) {
  sketch.validate();
  const std::size_t k = sketch.mins.size();
  if (k < 2) {
    throw std::invalid_argument(
        "total-weight estimation from minimum ranks needs k >= 2");
  }
  KahanSum rank_sum;
  for (const auto& e : sketch.mins) rank_sum.add(e.rank);
  const double s = rank_sum.value();
  WsrTotalEstimates out;
  out.unbiased = static_cast<double>(k - 1) / s;
  out.maximum_likelihood = static_cast<double>(k) / s;
  out.inverse_total = s / static_cast<double>(k);
  return out;
}

WsrSubpopEstimates wsr_subpop_with_total(const KMinsSketch& sketch,
                                         const Predicate& predicate,
                                         double total_weight) {
  sketch.validate();
  if (!(total_weight > 0.0) || !std::isfinite(total_weight)) {
    throw std::invalid_argument("total weight must be positive and finite");
  }
  const double k = static_cast<double>(sketch.mins.size());
  std::size_t multiplicity = 0;
  std::map<std::string, double> distinct;
  for (const auto& e : sketch.mins) {
    if (!predicate.matches(e)) continue;
    if (e.weight > total_weight * (1.0 + 1e-12)) {
      throw std::invalid_argument("sampled weight exceeds the total weight");
    }
    ++multiplicity;
    distinct.emplace(e.id, e.weight);
  }
  WsrSubpopEstimates out;
  KahanSum ht;
  for (const auto& [id, w] : distinct) {
    const double frac = std::min(1.0, w / total_weight);
    // Inclusion probability of an item across k independent draws.
    const double p = frac >= 1.0 ? 1.0 : -std::expm1(k * std::log1p(-frac));
    ht.add(w / p);
  }
  out.horvitz_thompson = ht.value();
  out.ratio = static_cast<double>(multiplicity) * total_weight / k;
  return out;
}

}  // namespace bks
