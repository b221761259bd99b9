#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bks/types.hpp"

namespace bks {

// Conjunctive attribute filter.  Grammar:
//   predicate := '*' | clause ( '&&' clause )*
//   clause    := name op value
//   op        := '=' | '!=' | '<' | '<=' | '>' | '>='
// '=' and '!=' compare attribute strings; the ordered operators compare
// numerically and require both the value and the attribute to parse as
// numbers.
class Predicate {
 public:
  static Predicate parse(std::string_view text);  // throws parse_error
  static Predicate match_all();
  static Predicate attribute_equals(std::string name, std::string value);

  // True when every clause holds for the item's attributes.  Referencing an
  // attribute the item lacks (or comparing a non-numeric attribute with an
  // ordered operator) raises std::invalid_argument naming the item.
  bool matches(const AttributeMap& attributes, std::string_view item_id) const;

  bool matches(const SketchEntry& entry) const {
    return matches(entry.attributes, entry.id);
  }
  bool matches(const WeightedItem& item) const {
    return matches(item.attributes, item.id);
  }

  bool is_match_all() const { return clauses_.empty(); }
  const std::string& text() const { return text_; }

 private:
  enum class Op { eq, ne, lt, le, gt, ge };

  struct Clause {
    std::string attribute;
    Op op;
    std::string value;
    double numeric_value = 0;  // meaningful for ordered operators
  };

  std::vector<Clause> clauses_;
  std::string text_ = "*";
};

}  // namespace bks
