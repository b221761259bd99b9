#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bks/predicate.hpp"
#include "bks/rng.hpp"
#include "bks/types.hpp"

namespace bks {

enum class EstimatorMethod {
  ws_rc,
  pri_rc,
  ws_sc_exact,
  ws_sc_markov,
  ws_prefix,
};

const char* estimator_method_name(EstimatorMethod method);

// Per-entry adjusted weights: each retained entry gets a value whose
// expectation over sketches equals the entry's true weight (items outside the
// sketch implicitly contribute 0).  Summing over a predicate's matches gives
// an unbiased subpopulation-weight estimate.
struct AdjustedWeightAssignment {
  EstimatorMethod method = EstimatorMethod::ws_rc;
  bool uses_total_weight = false;
  std::vector<SketchEntry> entries;  // retained entries in rank order
  std::vector<double> adjusted;      // parallel to `entries`
};

// Rank-conditioning adjusted weights.  Exponential: w/(1-e^{-w r});
// priority: max(w, 1/r); an exact sketch yields the true weights.
AdjustedWeightAssignment rc_adjusted_weights(const BottomKSketch& sketch);

// Probability that every item of `weights` draws an exponential rank below
// that of an independent item of weight `ell`:
//   f(s, ell) = integral_0^inf ell e^{-ell x} prod_j (1 - e^{-w_j x}) dx,
// with f(s, 0) = 1 by convention.  Evaluated by signed subset enumeration up
// to kSubsetConditioningExactCap weights and by quadrature beyond.
inline constexpr std::size_t kSubsetConditioningExactCap = 20;
double f_subset_prob(std::span<const double> weights, double ell);
double f_subset_prob_quadrature(std::span<const double> weights, double ell,
                                double abs_tol = 1e-12);
// Same integrand truncated to [0, y]; used by density-style bounds.
double f_subset_prob_upto(std::span<const double> weights, double ell,
                          double y);

// Subset-conditioning adjusted weights, exact evaluation:
//   a(i) = w(i) f(s \ {i}, ell) / f(s, ell),  ell = W - w(s).
// Requires the total weight W and at most kSubsetConditioningExactCap entries.
AdjustedWeightAssignment sc_adjusted_weights_exact(const BottomKSketch& sketch,
                                                   double total_weight);

// Markov-chain approximation of subset conditioning: walks permutations of
// the retained set, draws the threshold rank from each permutation's
// conditional law (a sum of k+1 exponentials), and averages rank-conditioning
// weights across all draws.  Unbiased for any parameter choice.
struct MarkovParams {
  int permnum = 20;  // permutation steps
  int inperm = 20;   // threshold draws per permutation
};
AdjustedWeightAssignment sc_adjusted_weights_markov(const BottomKSketch& sketch,
                                                    double total_weight,
                                                    const MarkovParams& params,
                                                    SplitRng& rng);

// Prefix-conditioning adjusted weights: conditions on the ordered (k-1)
// prefix of the other retained items; O(k) per item after prefix sums.
AdjustedWeightAssignment prefix_adjusted_weights(const BottomKSketch& sketch,
                                                 double total_weight);

// Sum of adjusted weights over entries matching the predicate.
double estimate_subpop(const AdjustedWeightAssignment& assignment,
                       const Predicate& predicate);

// Estimate of sum_{i in J} h(i): each matching entry contributes
// h(entry) * adjusted / weight.
double estimate_value_sum(const AdjustedWeightAssignment& assignment,
                          const Predicate& predicate,
                          const std::function<double(const SketchEntry&)>& h);

// Maximum-likelihood estimators over exponential-rank sketches.  `redraws`
// optionally re-randomizes the retained permutation below the threshold rank
// and averages the resulting solutions.
double ml_total_weight(const BottomKSketch& sketch, int redraws = 0,
                       SplitRng* rng = nullptr);
double ml_subpop(const BottomKSketch& sketch, const Predicate& predicate,
                 int redraws = 0, SplitRng* rng = nullptr);
double ml_subpop_with_total(const BottomKSketch& sketch,
                            const Predicate& predicate, double total_weight,
                            int redraws = 0, SplitRng* rng = nullptr);

// Estimators over k-mins sketches (weighted sampling with replacement).
struct WsrTotalEstimates {
  double unbiased;            // (k-1)/sum of min ranks
  double maximum_likelihood;  // k/sum
  double inverse_total;       // sum/k, unbiased for 1/W
};
WsrTotalEstimates wsr_total_weight(const KMinsSketch& sketch);

struct WsrSubpopEstimates {
  double horvitz_thompson;  // per-distinct-member inclusion-probability form
  double ratio;             // multiplicity * W / k
};
WsrSubpopEstimates wsr_subpop_with_total(const KMinsSketch& sketch,
                                         const Predicate& predicate,
                                         double total_weight);

}  // namespace bks
