#include "bks/rank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bks {

namespace {

void check_weight(double weight) {
  if (!(weight > 0) || !std::isfinite(weight)) {
    throw std::domain_error("rank draw requires a positive finite weight");
  }
}

}  // namespace

double rank_cdf(RankFamily family, double weight, double x) {
  check_weight(weight);
  if (std::isnan(x)) throw std::domain_error("rank_cdf: x is NaN");
  if (x <= 0) return 0;
  switch (family) {
    case RankFamily::exponential:
      return -std::expm1(-weight * x);
    case RankFamily::priority:
      return std::min(1.0, weight * x);
    case RankFamily::uniform:
      return std::min(1.0, x);
  }
  return 0;
}

double rank_icdf(RankFamily family, double weight, double p) {
  check_weight(weight);
  if (!(p >= 0) || !(p < 1)) {
    throw std::domain_error("rank_icdf requires p in [0,1)");
  }
  switch (family) {
    case RankFamily::exponential:
      return -std::log1p(-p) / weight;
    case RankFamily::priority:
      return p / weight;
    case RankFamily::uniform:
      return p;
  }
  return 0;
}

double rank_from_uniform(RankFamily family, double weight, double u) {
  check_weight(weight);
  if (!(u > 0) || !(u < 1)) {
    throw std::domain_error("rank_from_uniform requires u in (0,1)");
  }
  switch (family) {
    case RankFamily::exponential:
      return -std::log(u) / weight;
    case RankFamily::priority:
      return u / weight;
    case RankFamily::uniform:
      return u;
  }
  return 0;
}

double draw_rank_value(RankFamily family, double weight, SplitRng& rng) {
  return rank_from_uniform(family, weight, rng.open01());
}

RankValue draw_rank(const WeightedItem& item, RankFamily family,
                    SplitRng& rng) {
  return RankValue{draw_rank_value(family, item.weight, rng), item.id};
}

double redraw_rank_below(RankFamily family, double weight, double cap,
                         SplitRng& rng) {
  check_weight(weight);
  if (std::isnan(cap) || cap <= 0) {
    throw std::domain_error("redraw_rank_below requires a positive cap");
  }
  if (std::isinf(cap)) return draw_rank_value(family, weight, rng);
  double scale = rank_cdf(family, weight, cap);
  if (scale <= 0) {
    throw std::domain_error("redraw_rank_below: cap has zero mass");
  }
  // Guard against p rounding up to the cap's CDF exactly; the open uniform
  // keeps the draw strictly inside (0, cap) apart from that rounding.
  double p = std::min(rng.open01() * scale,
                      scale * (1 - std::numeric_limits<double>::epsilon()));
  return std::min(rank_icdf(family, weight, p), cap);
}

std::vector<RankValue> redraw_sketch_ranks(const BottomKSketch& sketch,
                                           SplitRng& rng) {
  double cap = sketch.r_k_plus_1
                   ? *sketch.r_k_plus_1
                   : std::numeric_limits<double>::infinity();
  std::vector<RankValue> out;
  out.reserve(sketch.entries.size());
  for (const auto& e : sketch.entries) {
    out.push_back(
        RankValue{redraw_rank_below(sketch.family, e.weight, cap, rng), e.id});
  }
  return out;
}

}  // namespace bks
