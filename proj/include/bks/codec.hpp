#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bks/types.hpp"

namespace bks {

inline constexpr int kSketchFormatVersion = 1;

using AnySketch = std::variant<BottomKSketch, KMinsSketch>;

// Canonical versioned document: field-named JSON with round-trip-exact
// floating point encoding.
std::string sketch_to_json(const BottomKSketch& sketch);
std::string sketch_to_json(const KMinsSketch& sketch);
std::string sketch_to_json(const AnySketch& sketch);

AnySketch sketch_from_json(std::string_view text);  // throws parse_error

void save_sketch(const AnySketch& sketch, const std::string& path);
AnySketch load_sketch(const std::string& path);

// Weighted record CSV with header `id,weight[,attr:<name>...]`.
std::vector<WeightedItem> parse_items_csv(std::istream& in,
                                          const std::string& source_name);
std::vector<WeightedItem> load_items_csv(const std::string& path);

}  // namespace bks
