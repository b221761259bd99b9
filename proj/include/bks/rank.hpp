#pragma once

#include <vector>

#include "bks/rng.hpp"
#include "bks/types.hpp"

namespace bks {

// CDF of the rank distribution for an item of the given weight, evaluated at
// x.  Exponential: 1 - e^{-wx}.  Priority: min(1, wx).  Uniform: min(1, x).
double rank_cdf(RankFamily family, double weight, double x);

// Inverse of rank_cdf in x for p in [0, 1).
double rank_icdf(RankFamily family, double weight, double p);

// Canonical mapping from a uniform draw u in (0,1) to a rank value:
// exponential -ln(u)/w, priority u/w, uniform u.
double rank_from_uniform(RankFamily family, double weight, double u);

double draw_rank_value(RankFamily family, double weight, SplitRng& rng);
RankValue draw_rank(const WeightedItem& item, RankFamily family, SplitRng& rng);

// Rank conditioned on falling below `cap`: density f_w(x)/F_w(cap) on
// [0, cap].  An infinite cap degenerates to an unconditional draw.
double redraw_rank_below(RankFamily family, double weight, double cap,
                         SplitRng& rng);

// Fresh ranks for every retained entry, conditioned below the sketch's
// threshold rank (unconditional when the sketch is exact).  Returned in entry
// order; re-sorting them yields a fresh permutation of the retained set.
std::vector<RankValue> redraw_sketch_ranks(const BottomKSketch& sketch,
                                           SplitRng& rng);

}  // namespace bks
