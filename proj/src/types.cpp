#include "bks/types.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "bks/errors.hpp"

namespace bks {

const char* family_name(RankFamily family) {
  switch (family) {
    case RankFamily::exponential:
      return "ws";
    case RankFamily::priority:
      return "pri";
    case RankFamily::uniform:
      return "uni";
  }
  return "?";
}

RankFamily family_from_name(std::string_view name) {
  if (name == "ws" || name == "exponential") return RankFamily::exponential;
  if (name == "pri" || name == "priority") return RankFamily::priority;
  if (name == "uni" || name == "uniform") return RankFamily::uniform;
  throw parse_error("unknown rank family '" + std::string(name) +
                    "' (expected ws, pri, or uni)");
}

bool rank_less(double a_value, std::string_view a_owner, double b_value,
               std::string_view b_owner) {
  if (a_value != b_value) return a_value < b_value;
  return a_owner < b_owner;
}

bool rank_less(const RankValue& a, const RankValue& b) {
  return rank_less(a.value, a.owner, b.value, b.owner);
}

double BottomKSketch::retained_weight() const {
  double w = 0;
  for (const auto& e : entries) w += e.weight;
  return w;
}

namespace {

void check_entry(const SketchEntry& e, std::size_t index, const char* what) {
  if (e.id.empty()) {
    throw std::invalid_argument(std::string(what) + " entry " +
                                std::to_string(index) + ": empty id");
  }
  if (!(e.weight > 0) || !std::isfinite(e.weight)) {
    throw std::invalid_argument(std::string(what) + " entry " +
                                std::to_string(index) + " ('" + e.id +
                                "'): weight must be positive and finite");
  }
  if (!(e.rank >= 0) || !std::isfinite(e.rank)) {
    throw std::invalid_argument(std::string(what) + " entry " +
                                std::to_string(index) + " ('" + e.id +
                                "'): rank must be nonnegative and finite");
  }
}

}  // namespace

void BottomKSketch::validate() const {
  if (k == 0) throw std::invalid_argument("sketch: k must be at least 1");
  if (entries.size() > k) {
    throw std::invalid_argument("sketch: more than k retained entries");
  }
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    check_entry(entries[i], i, "sketch");
    if (!seen.insert(entries[i].id).second) {
      throw std::invalid_argument("sketch: duplicate entry id '" +
                                  entries[i].id + "'");
    }
    if (i > 0 && !rank_less(entries[i - 1].rank, entries[i - 1].id,
                            entries[i].rank, entries[i].id)) {
      throw std::invalid_argument(
          "sketch: entries must be in strictly increasing rank order (entry " +
          std::to_string(i) + ")");
    }
  }
  if (r_k_plus_1) {
    if (!(*r_k_plus_1 > 0) || !std::isfinite(*r_k_plus_1)) {
      throw std::invalid_argument(
          "sketch: threshold rank must be positive and finite");
    }
    if (entries.size() < k) {
      throw std::invalid_argument(
          "sketch: threshold rank present but fewer than k entries retained");
    }
    if (!entries.empty() && *r_k_plus_1 < entries.back().rank) {
      throw std::invalid_argument(
          "sketch: threshold rank below the largest retained rank");
    }
  }
  if (total_weight) {
    if (!(*total_weight > 0) || !std::isfinite(*total_weight)) {
      throw std::invalid_argument(
          "sketch: total weight must be positive and finite");
    }
    if (*total_weight < retained_weight() * (1 - 1e-12)) {
      throw std::invalid_argument(
          "sketch: total weight below the retained weight");
    }
  }
  if (ground_set_size) {
    if (*ground_set_size < entries.size()) {
      throw std::invalid_argument(
          "sketch: ground set smaller than the retained entry count");
    }
    bool should_have_threshold = *ground_set_size > k;
    if (should_have_threshold != r_k_plus_1.has_value()) {
      throw std::invalid_argument(
          "sketch: threshold rank must be present exactly when the ground set "
          "exceeds k");
    }
    if (!should_have_threshold && entries.size() != *ground_set_size) {
      throw std::invalid_argument(
          "sketch: exact sketch must retain the whole ground set");
    }
  }
}

void KMinsSketch::validate() const {
  if (k == 0) throw std::invalid_argument("k-mins sketch: k must be at least 1");
  if (mins.size() != k) {
    throw std::invalid_argument(
        "k-mins sketch: expected one minimum per assignment");
  }
  for (std::size_t i = 0; i < mins.size(); ++i) {
    check_entry(mins[i], i, "k-mins sketch");
  }
  if (total_weight && (!(*total_weight > 0) || !std::isfinite(*total_weight))) {
    throw std::invalid_argument(
        "k-mins sketch: total weight must be positive and finite");
  }
}

}  // namespace bks
