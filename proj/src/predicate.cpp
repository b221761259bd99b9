#include "bks/predicate.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "bks/errors.hpp"

namespace bks {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_number(std::string_view text, double* out) {
  std::string buf(text);
  const char* begin = buf.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || std::isnan(v)) return false;
  *out = v;
  return true;
}

}  // namespace

Predicate Predicate::match_all() { return Predicate(); }

Predicate Predicate::attribute_equals(std::string name, std::string value) {
  Predicate p;
  p.text_ = name + "=" + value;
  p.clauses_.push_back(Clause{std::move(name), Op::eq, std::move(value)});
  return p;
}

Predicate Predicate::parse(std::string_view text) {
  std::string_view whole = trim(text);
  if (whole.empty() || whole == "*" || whole == "all") return match_all();

  Predicate p;
  p.text_ = std::string(whole);
  std::string_view rest = whole;
  while (true) {
    std::size_t split = rest.find("&&");
    std::string_view clause_text =
        trim(split == std::string_view::npos ? rest : rest.substr(0, split));
    if (clause_text.empty()) {
      throw parse_error("predicate '" + std::string(whole) +
                        "': empty clause");
    }

    // Two-character operators first so '<=' is not read as '<' plus '='.
    static constexpr struct {
      std::string_view token;
      Op op;
    } kOps[] = {{"!=", Op::ne}, {"<=", Op::le}, {">=", Op::ge},
                {"=", Op::eq},  {"<", Op::lt},  {">", Op::gt}};
    std::size_t best_pos = std::string_view::npos;
    Op best_op = Op::eq;
    std::size_t best_len = 0;
    for (const auto& candidate : kOps) {
      std::size_t pos = clause_text.find(candidate.token);
      if (pos != std::string_view::npos &&
          (best_pos == std::string_view::npos || pos < best_pos ||
           (pos == best_pos && candidate.token.size() > best_len))) {
        best_pos = pos;
        best_op = candidate.op;
        best_len = candidate.token.size();
      }
    }
    if (best_pos == std::string_view::npos) {
      throw parse_error("predicate clause '" + std::string(clause_text) +
                        "': no comparison operator");
    }
    Clause clause;
    clause.attribute = std::string(trim(clause_text.substr(0, best_pos)));
    clause.op = best_op;
    clause.value = std::string(trim(clause_text.substr(best_pos + best_len)));
    if (clause.attribute.empty()) {
      throw parse_error("predicate clause '" + std::string(clause_text) +
                        "': missing attribute name");
    }
    if (clause.value.empty()) {
      throw parse_error("predicate clause '" + std::string(clause_text) +
                        "': missing comparison value");
    }
    if (clause.op != Op::eq && clause.op != Op::ne) {
      if (!parse_number(clause.value, &clause.numeric_value)) {
        throw parse_error("predicate clause '" + std::string(clause_text) +
                          "': ordered comparison needs a numeric value");
      }
    }
    p.clauses_.push_back(std::move(clause));

    if (split == std::string_view::npos) break;
    rest = rest.substr(split + 2);
  }
  return p;
}

bool Predicate::matches(const AttributeMap& attributes,
                        std::string_view item_id) const {
  for (const Clause& clause : clauses_) {
    auto found = attributes.find(clause.attribute);
    if (found == attributes.end()) {
      throw std::invalid_argument("item '" + std::string(item_id) +
                                  "': predicate references missing attribute '" +
                                  clause.attribute + "'");
    }
    const std::string& actual = found->second;
    bool ok = false;
    switch (clause.op) {
      case Op::eq:
        ok = actual == clause.value;
        break;
      case Op::ne:
        ok = actual != clause.value;
        break;
      default: {
        double lhs = 0;
        if (!parse_number(actual, &lhs)) {
          throw std::invalid_argument(
              "item '" + std::string(item_id) + "': attribute '" +
              clause.attribute + "' value '" + actual +
              "' is not numeric but the predicate compares it numerically");
        }
        switch (clause.op) {
          case Op::lt: ok = lhs < clause.numeric_value; break;
          case Op::le: ok = lhs <= clause.numeric_value; break;
          case Op::gt: ok = lhs > clause.numeric_value; break;
          case Op::ge: ok = lhs >= clause.numeric_value; break;
          default: break;
        }
        break;
      }
    }
    if (!ok) return false;
  }
  return true;
}

}  // namespace bks
