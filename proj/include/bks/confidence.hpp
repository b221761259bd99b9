#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bks/predicate.hpp"
#include "bks/rng.hpp"
#include "bks/types.hpp"

namespace bks {

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double delta = 0.05;  // per-side error probability
  std::string method;
};

// v(t, s_0..s_h): sum of h+1 independent exponentials with rates t - s_j.
// Conditioned on the ordered prefix of a rank assignment, the successive
// rank gaps have exactly these laws, which is what every solver below
// inverts.
struct SumExpSpec {
  double t = 0.0;
  std::vector<double> prefix_sums;  // nondecreasing, all < t
};

// One parametric sample of v: sum of -ln(u_j)/(t - s_j).  Monotone
// decreasing in t for fixed uniforms.
double sample_sum_exp(const SumExpSpec& spec, std::span<const double> uniforms);

enum class BoundSide { lower, upper };

// Solves E[v(x,.)] + a sqrt(Var[v(x,.)]) = tau for x, with a the
// (1-delta)-normal quantile on the upper side and its negation on the lower
// side.  Returns nullopt when the lower-side equation has no root above
// s_h (the caller substitutes its degenerate bound).
std::optional<double> solve_normal_approx(std::span<const double> prefix_sums,
                                          double tau, double delta,
                                          BoundSide side);

// Empirical delta-quantile (ascending order statistic at ceil(delta*draws),
// 1-based) of `draws` independent root samples.  `root_of_draw` maps fresh
// randomness to one root of the parametric equation; failures are rethrown
// tagged with the draw index.
double quantile_method_solve(
    const std::function<double(SplitRng&)>& root_of_draw, double delta,
    int draws, SplitRng& rng);

enum class WsBoundMethod { normal, quantile, density };
const char* ws_bound_method_name(WsBoundMethod method);
WsBoundMethod ws_bound_method_from_name(std::string_view name);

inline constexpr int kDefaultBoundDraws = 200;

// Total-weight bounds from an exponential-rank sketch: inverts
// Pr{v(x, s_0..s_k) <= r_{k+1}} = delta (lower) and = 1-delta (upper), by
// normal approximation or by Monte Carlo quantiles; the density method
// instead inverts the conditional distribution function of the threshold
// rank given the retained set, over the unseen weight.  An exact sketch
// yields [w(s), w(s)].
ConfidenceInterval ws_bounds_total(const BottomKSketch& sketch, double delta,
                                   WsBoundMethod method,
                                   SplitRng* rng = nullptr,
                                   int draws = kDefaultBoundDraws);

// Subpopulation bounds without the total weight.  Upper: root of the
// (1-delta) equation over the matched prefix sums against r_{k+1}.  Lower: 0
// with no match, else the root of the delta equation over s_0..s_{c-1}
// against r_k, clamped to at least w(J intersect s).
ConfidenceInterval ws_bounds_subpop(const BottomKSketch& sketch,
                                    const Predicate& predicate, double delta,
                                    WsBoundMethod method,
                                    SplitRng* rng = nullptr,
                                    int draws = kDefaultBoundDraws);

// Subpopulation bounds that exploit a known total weight: Monte Carlo
// inversion of the lexicographic observation (matched count, rank-gap
// difference) via the three-phase range/monotone-search/truncation solver;
// bounds are the delta- and (1-delta)-quantiles of the per-draw solutions.
ConfidenceInterval ws_bounds_subpop_with_total(const BottomKSketch& sketch,
                                               const Predicate& predicate,
                                               double total_weight,
                                               double delta, int draws,
                                               SplitRng& rng);

// Chernoff-style bounds for priority ranks: matched items with w * tau >= 1
// are retained surely and contribute their weight; the rest are counted and
// the count's tail bounds are divided by tau.
ConfidenceInterval pri_bounds_subpop(const BottomKSketch& sketch,
                                     const Predicate& predicate, double delta);

// Normal-approximation bounds (1 +- a/sqrt(k))/rbar on the total weight from
// a k-mins sketch, rbar the mean minimum rank.
ConfidenceInterval wsr_bounds_total(const KMinsSketch& sketch, double delta);

}  // namespace bks
