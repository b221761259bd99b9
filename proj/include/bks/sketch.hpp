#pragma once

#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

#include "bks/rng.hpp"
#include "bks/types.hpp"

namespace bks {

// One-shot builder over a materialized item set: draws one rank per item and
// keeps the k smallest plus the (k+1)-smallest rank.
BottomKSketch build_bottom_k(const std::vector<WeightedItem>& items,
                             std::size_t k, RankFamily family, SplitRng& rng);

// Deterministic construction from externally supplied ranks (parallel to
// `items`).  Useful for sharded builds that share one rank assignment.
BottomKSketch build_bottom_k_from_ranks(const std::vector<WeightedItem>& items,
                                        const std::vector<double>& ranks,
                                        std::size_t k, RankFamily family);

// Single-pass builder.  For exponential ranks, runs of rejected items are
// skipped by drawing the accumulated weight that passes before the next
// acceptance, so rank draws happen only for accepted items.
class StreamSketchBuilder {
 public:
  StreamSketchBuilder(std::size_t k, RankFamily family, SplitRng rng);

  void add(const WeightedItem& item);
  BottomKSketch finish();

 private:
  void accept(const WeightedItem& item, double rank);

  std::size_t k_;
  RankFamily family_;
  SplitRng rng_;
  std::vector<SketchEntry> heap_;     // max-heap on (rank, id), size <= k+1
  std::unordered_set<std::string> ids_;
  double total_weight_ = 0;
  std::uint64_t count_ = 0;
  double skip_left_ = -1;             // weight still to pass before the next
                                      // acceptance; negative means "not drawn"
  bool finished_ = false;
};

BottomKSketch build_bottom_k_stream(const std::vector<WeightedItem>& items,
                                    std::size_t k, RankFamily family,
                                    SplitRng& rng);

// k smallest ranks of the union of two sketches built over one shared rank
// assignment.  Entries present in both inputs must agree on rank and weight.
// Total weight and ground set size are dropped: the inputs may overlap, so
// the union's values are not derivable from the operands.
BottomKSketch merge_sketches(const BottomKSketch& a, const BottomKSketch& b,
                             std::size_t k);

// k-mins sketch under exponential ranks: each record is the minimum of an
// independent assignment, equivalently a weighted-with-replacement pick with
// an Exp(w(I)) rank.
KMinsSketch build_k_mins(const std::vector<WeightedItem>& items, std::size_t k,
                         SplitRng& rng);

}  // namespace bks
