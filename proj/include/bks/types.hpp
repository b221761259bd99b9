#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bks {

// Rank families.  Exponential ranks make a bottom-k sketch equivalent to
// weighted sampling without replacement; priority ranks are uniform on
// [0, 1/w]; uniform ranks ignore the weight entirely.
enum class RankFamily { exponential, priority, uniform };

const char* family_name(RankFamily family);
RankFamily family_from_name(std::string_view name);  // throws parse_error

using AttributeMap = std::map<std::string, std::string>;

struct WeightedItem {
  std::string id;
  double weight = 0;
  AttributeMap attributes;
};

// A rank paired with the id of the item that drew it.  Ties between equal
// rank values are broken by id so orderings are total and reproducible.
struct RankValue {
  double value = 0;
  std::string owner;
};

bool rank_less(double a_value, std::string_view a_owner, double b_value,
               std::string_view b_owner);
bool rank_less(const RankValue& a, const RankValue& b);

struct SketchEntry {
  std::string id;
  double weight = 0;
  double rank = 0;
  AttributeMap attributes;
};

// Bottom-k summary: the k entries with smallest ranks in ascending rank
// order, plus the (k+1)-smallest rank when the ground set had more than k
// items.  An absent threshold rank means the sketch holds the whole set.
struct BottomKSketch {
  std::size_t k = 0;
  RankFamily family = RankFamily::exponential;
  std::vector<SketchEntry> entries;
  std::optional<double> r_k_plus_1;
  std::optional<double> total_weight;
  std::optional<std::uint64_t> ground_set_size;

  bool exact() const { return !r_k_plus_1.has_value(); }
  double retained_weight() const;
  void validate() const;  // throws std::invalid_argument on broken invariants
};

// k-mins summary: one minimum-rank record per independent exponential rank
// assignment, in assignment order.  The same item may appear repeatedly.
struct KMinsSketch {
  std::size_t k = 0;
  std::vector<SketchEntry> mins;
  std::optional<double> total_weight;
  std::optional<std::uint64_t> ground_set_size;

  void validate() const;
};

}  // namespace bks
