#include "bks/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include "bks/errors.hpp"
#include "bks/rank.hpp"

namespace bks {

namespace {

bool entry_rank_less(const SketchEntry& a, const SketchEntry& b) {
  return rank_less(a.rank, a.id, b.rank, b.id);
}

void check_item(const WeightedItem& item, std::size_t index) {
  if (item.id.empty()) {
    throw std::invalid_argument("item " + std::to_string(index) + ": empty id");
  }
  if (!(item.weight > 0) || !std::isfinite(item.weight)) {
    throw std::invalid_argument("item '" + item.id +
                                "': weight must be positive and finite");
  }
}

void validate_items(const std::vector<WeightedItem>& items) {
  if (items.empty()) throw std::invalid_argument("item set is empty");
  std::unordered_set<std::string_view> seen;
  seen.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    check_item(items[i], i);
    if (!seen.insert(items[i].id).second) {
      throw std::invalid_argument("duplicate item id '" + items[i].id + "'");
    }
  }
}

BottomKSketch assemble(const std::vector<WeightedItem>& items,
                       const std::vector<double>& ranks, std::size_t k,
                       RankFamily family) {
  const std::size_t n = items.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto less = [&](std::size_t a, std::size_t b) {
    return rank_less(ranks[a], items[a].id, ranks[b], items[b].id);
  };
  const std::size_t keep = std::min(n, k + 1);
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), less);

  BottomKSketch sketch;
  sketch.k = k;
  sketch.family = family;
  const std::size_t retained = std::min(n, k);
  sketch.entries.reserve(retained);
  for (std::size_t i = 0; i < retained; ++i) {
    const WeightedItem& it = items[order[i]];
    sketch.entries.push_back(
        SketchEntry{it.id, it.weight, ranks[order[i]], it.attributes});
  }
  if (n > k) sketch.r_k_plus_1 = ranks[order[k]];
  double total = 0;
  for (const auto& it : items) total += it.weight;
  sketch.total_weight = total;
  sketch.ground_set_size = n;
  sketch.validate();
  return sketch;
}

}  // namespace

BottomKSketch build_bottom_k(const std::vector<WeightedItem>& items,
                             std::size_t k, RankFamily family, SplitRng& rng) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  validate_items(items);
  std::vector<double> ranks(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    ranks[i] = draw_rank_value(family, items[i].weight, rng);
  }
  return assemble(items, ranks, k, family);
}

BottomKSketch build_bottom_k_from_ranks(const std::vector<WeightedItem>& items,
                                        const std::vector<double>& ranks,
                                        std::size_t k, RankFamily family) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  validate_items(items);
  if (ranks.size() != items.size()) {
    throw std::invalid_argument("one rank per item is required");
  }
  for (double r : ranks) {
    if (!(r >= 0) || !std::isfinite(r)) {
      throw std::invalid_argument("ranks must be nonnegative and finite");
    }
  }
  return assemble(items, ranks, k, family);
}

StreamSketchBuilder::StreamSketchBuilder(std::size_t k, RankFamily family,
                                         SplitRng rng)
    : k_(k), family_(family), rng_(rng) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  heap_.reserve(k + 2);
}

void StreamSketchBuilder::accept(const WeightedItem& item, double rank) {
  heap_.push_back(SketchEntry{item.id, item.weight, rank, item.attributes});
  std::push_heap(heap_.begin(), heap_.end(), entry_rank_less);
  if (heap_.size() > k_ + 1) {
    std::pop_heap(heap_.begin(), heap_.end(), entry_rank_less);
    heap_.pop_back();
  }
}

void StreamSketchBuilder::add(const WeightedItem& item) {
  if (finished_) throw std::logic_error("stream builder already finished");
  check_item(item, count_);
  if (!ids_.insert(item.id).second) {
    throw std::invalid_argument("duplicate item id '" + item.id + "'");
  }
  total_weight_ += item.weight;
  ++count_;

  if (heap_.size() < k_ + 1) {
    accept(item, draw_rank_value(family_, item.weight, rng_));
    skip_left_ = -1;
    return;
  }

  const SketchEntry& top = heap_.front();
  if (family_ == RankFamily::exponential) {
    // The weight that passes before some item beats the current threshold is
    // Exp(r_max) distributed, so whole runs of rejections cost no rank draws.
    if (skip_left_ < 0) skip_left_ = rng_.exponential(top.rank);
    skip_left_ -= item.weight;
    if (skip_left_ >= 0) return;
    double rank = redraw_rank_below(family_, item.weight, top.rank, rng_);
    accept(item, rank);
    skip_left_ = -1;
  } else {
    double rank = draw_rank_value(family_, item.weight, rng_);
    if (rank_less(rank, item.id, top.rank, top.id)) accept(item, rank);
  }
}

BottomKSketch StreamSketchBuilder::finish() {
  if (finished_) throw std::logic_error("stream builder already finished");
  finished_ = true;
  if (count_ == 0) throw std::invalid_argument("item set is empty");
  std::sort(heap_.begin(), heap_.end(), entry_rank_less);

  BottomKSketch sketch;
  sketch.k = k_;
  sketch.family = family_;
  if (count_ > k_) {
    sketch.r_k_plus_1 = heap_.back().rank;
    heap_.pop_back();
  }
  sketch.entries = std::move(heap_);
  sketch.total_weight = total_weight_;
  sketch.ground_set_size = count_;
  sketch.validate();
  return sketch;
}

BottomKSketch build_bottom_k_stream(const std::vector<WeightedItem>& items,
                                    std::size_t k, RankFamily family,
                                    SplitRng& rng) {
  StreamSketchBuilder builder(k, family, rng.split(rng.next_u64()));
  for (const auto& item : items) builder.add(item);
  return builder.finish();
}

BottomKSketch merge_sketches(const BottomKSketch& a, const BottomKSketch& b,
                             std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  a.validate();
  b.validate();
  if (a.family != b.family) {
    throw std::invalid_argument("cannot merge sketches of different families");
  }
  // An operand only knows its k smallest ranks; asking for more is answerable
  // only when the operand holds its whole ground set.
  for (const BottomKSketch* s : {&a, &b}) {
    if (k > s->k && !s->exact()) {
      throw capability_error(
          "merge k exceeds an operand's k and the operand is not exact");
    }
  }

  std::map<std::string_view, const SketchEntry*> by_id;
  for (const BottomKSketch* s : {&a, &b}) {
    for (const auto& e : s->entries) {
      auto [pos, inserted] = by_id.emplace(e.id, &e);
      if (!inserted) {
        const SketchEntry& other = *pos->second;
        if (other.rank != e.rank || other.weight != e.weight) {
          throw std::invalid_argument(
              "merge: entry '" + e.id +
              "' appears in both sketches with conflicting rank or weight");
        }
      }
    }
  }

  std::vector<SketchEntry> entries;
  entries.reserve(by_id.size());
  for (const auto& [id, e] : by_id) entries.push_back(*e);
  std::sort(entries.begin(), entries.end(), entry_rank_less);

  std::vector<double> candidate_ranks;
  candidate_ranks.reserve(entries.size() + 2);
  for (const auto& e : entries) candidate_ranks.push_back(e.rank);
  if (a.r_k_plus_1) candidate_ranks.push_back(*a.r_k_plus_1);
  if (b.r_k_plus_1) candidate_ranks.push_back(*b.r_k_plus_1);
  std::sort(candidate_ranks.begin(), candidate_ranks.end());

  BottomKSketch out;
  out.k = k;
  out.family = a.family;
  if (entries.size() > k) entries.resize(k);
  out.entries = std::move(entries);
  if (candidate_ranks.size() >= k + 1) out.r_k_plus_1 = candidate_ranks[k];
  out.validate();
  return out;
}

namespace {

// Walker alias table for O(1) weighted index draws.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<WeightedItem>& items) {
    const std::size_t n = items.size();
    double total = 0;
    for (const auto& it : items) total += it.weight;
    prob_.resize(n);
    alias_.resize(n);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = items[i].weight * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      std::size_t s = small.back();
      std::size_t l = large.back();
      small.pop_back();
      large.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    for (std::size_t i : large) prob_[i] = 1.0;
    for (std::size_t i : small) prob_[i] = 1.0;
  }

  std::size_t sample(SplitRng& rng) const {
    double x = rng.open01() * static_cast<double>(prob_.size());
    auto col = std::min(static_cast<std::size_t>(x), prob_.size() - 1);
    return (x - static_cast<double>(col)) < prob_[col] ? col : alias_[col];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

}  // namespace

KMinsSketch build_k_mins(const std::vector<WeightedItem>& items, std::size_t k,
                         SplitRng& rng) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  validate_items(items);
  double total = 0;
  for (const auto& it : items) total += it.weight;
  AliasTable alias(items);

  KMinsSketch sketch;
  sketch.k = k;
  sketch.mins.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const WeightedItem& it = items[alias.sample(rng)];
    double rank = rng.exponential(total);
    sketch.mins.push_back(SketchEntry{it.id, it.weight, rank, it.attributes});
  }
  sketch.total_weight = total;
  sketch.ground_set_size = items.size();
  sketch.validate();
  return sketch;
}

}  // namespace bks
