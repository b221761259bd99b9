#include "bks/codec.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "bks/errors.hpp"

namespace bks {

namespace {

using nlohmann::json;

json entry_to_json(const SketchEntry& e) {
  json j;
  j["id"] = e.id;
  j["weight"] = e.weight;
  j["rank"] = e.rank;
  if (!e.attributes.empty()) j["attrs"] = e.attributes;
  return j;
}

SketchEntry entry_from_json(const json& j, std::size_t index,
                            const char* list_name) {
  auto fail = [&](const std::string& why) -> SketchEntry {
    throw parse_error("sketch document: " + std::string(list_name) + "[" +
                      std::to_string(index) + "]: " + why);
  };
  if (!j.is_object()) return fail("expected an object");
  SketchEntry e;
  if (!j.contains("id") || !j["id"].is_string()) return fail("missing string 'id'");
  e.id = j["id"].get<std::string>();
  if (!j.contains("weight") || !j["weight"].is_number()) {
    return fail("missing numeric 'weight'");
  }
  e.weight = j["weight"].get<double>();
  if (!j.contains("rank") || !j["rank"].is_number()) {
    return fail("missing numeric 'rank'");
  }
  e.rank = j["rank"].get<double>();
  if (!(e.weight > 0) || !std::isfinite(e.weight)) {
    return fail("entry '" + e.id + "' has nonpositive weight");
  }
  if (!(e.rank >= 0) || !std::isfinite(e.rank)) {
    return fail("entry '" + e.id + "' has an invalid rank");
  }
  if (j.contains("attrs")) {
    if (!j["attrs"].is_object()) return fail("'attrs' must be an object");
    for (auto& [key, value] : j["attrs"].items()) {
      if (!value.is_string()) {
        return fail("attribute '" + key + "' must be a string");
      }
      e.attributes[key] = value.get<std::string>();
    }
  }
  return e;
}

json common_header(const char* kind) {
  json j;
  j["format"] = "bottomk-sketch";
  j["version"] = kSketchFormatVersion;
  j["kind"] = kind;
  return j;
}

}  // namespace

std::string sketch_to_json(const BottomKSketch& sketch) {
  sketch.validate();
  json j = common_header("bottomk");
  j["family"] = family_name(sketch.family);
  j["k"] = sketch.k;
  json entries = json::array();
  for (const auto& e : sketch.entries) entries.push_back(entry_to_json(e));
  j["entries"] = std::move(entries);
  if (sketch.r_k_plus_1) j["threshold_rank"] = *sketch.r_k_plus_1;
  if (sketch.total_weight) j["total_weight"] = *sketch.total_weight;
  if (sketch.ground_set_size) j["ground_set_size"] = *sketch.ground_set_size;
  return j.dump(2);
}

std::string sketch_to_json(const KMinsSketch& sketch) {
  sketch.validate();
  json j = common_header("kmins");
  j["k"] = sketch.k;
  json mins = json::array();
  for (const auto& e : sketch.mins) mins.push_back(entry_to_json(e));
  j["mins"] = std::move(mins);
  if (sketch.total_weight) j["total_weight"] = *sketch.total_weight;
  if (sketch.ground_set_size) j["ground_set_size"] = *sketch.ground_set_size;
  return j.dump(2);
}

std::string sketch_to_json(const AnySketch& sketch) {
  return std::visit([](const auto& s) { return sketch_to_json(s); }, sketch);
}

AnySketch sketch_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("sketch document: not valid JSON: ") +
                      e.what());
  }
  if (!j.is_object()) throw parse_error("sketch document: expected an object");
  if (j.value("format", std::string()) != "bottomk-sketch") {
    throw parse_error("sketch document: missing format tag 'bottomk-sketch'");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != kSketchFormatVersion) {
    throw parse_error("sketch document: unsupported version");
  }
  std::string kind = j.value("kind", std::string());
  if (!j.contains("k") || !j["k"].is_number_unsigned()) {
    throw parse_error("sketch document: missing unsigned 'k'");
  }

  auto read_optionals = [&](auto& sketch) {
    if (j.contains("total_weight")) {
      if (!j["total_weight"].is_number()) {
        throw parse_error("sketch document: 'total_weight' must be numeric");
      }
      sketch.total_weight = j["total_weight"].template get<double>();
    }
    if (j.contains("ground_set_size")) {
      if (!j["ground_set_size"].is_number_unsigned()) {
        throw parse_error(
            "sketch document: 'ground_set_size' must be a nonnegative "
            "integer");
      }
      sketch.ground_set_size = j["ground_set_size"].template get<std::uint64_t>();
    }
  };

  try {
    if (kind == "bottomk") {
      BottomKSketch sketch;
      sketch.k = j["k"].get<std::size_t>();
      sketch.family = family_from_name(j.value("family", std::string()));
      if (!j.contains("entries") || !j["entries"].is_array()) {
        throw parse_error("sketch document: missing 'entries' array");
      }
      std::size_t i = 0;
      for (const auto& item : j["entries"]) {
        sketch.entries.push_back(entry_from_json(item, i++, "entries"));
      }
      if (j.contains("threshold_rank")) {
        if (!j["threshold_rank"].is_number()) {
          throw parse_error("sketch document: 'threshold_rank' must be numeric");
        }
        sketch.r_k_plus_1 = j["threshold_rank"].get<double>();
      }
      read_optionals(sketch);
      sketch.validate();
      return sketch;
    }
    if (kind == "kmins") {
      KMinsSketch sketch;
      sketch.k = j["k"].get<std::size_t>();
      if (!j.contains("mins") || !j["mins"].is_array()) {
        throw parse_error("sketch document: missing 'mins' array");
      }
      std::size_t i = 0;
      for (const auto& item : j["mins"]) {
        sketch.mins.push_back(entry_from_json(item, i++, "mins"));
      }
      read_optionals(sketch);
      sketch.validate();
      return sketch;
    }
  } catch (const std::invalid_argument& e) {
    // Structural invariants double as document validation; surface them as
    // parse failures so callers see one error category for bad documents.
    throw parse_error(std::string("sketch document: ") + e.what());
  }
  throw parse_error("sketch document: unknown kind '" + kind + "'");
}

void save_sketch(const AnySketch& sketch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
  out << sketch_to_json(sketch) << '\n';
  out.flush();
  if (!out) throw std::invalid_argument("failed writing '" + path + "'");
}

AnySketch load_sketch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sketch_from_json(buf.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line,
                                        const std::string& where) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw parse_error(where + ": unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

std::vector<WeightedItem> parse_items_csv(std::istream& in,
                                          const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&] { return source_name + ":" + std::to_string(line_no); };

  if (!std::getline(in, line)) {
    throw parse_error(source_name + ": empty input, expected a header row");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv_line(line, where());
  if (header.size() < 2 || header[0] != "id" || header[1] != "weight") {
    throw parse_error(where() +
                      ": header must start with 'id,weight' followed by "
                      "optional 'attr:<name>' columns");
  }
  std::vector<std::string> attr_names;
  std::unordered_set<std::string> seen_attrs;
  for (std::size_t i = 2; i < header.size(); ++i) {
    const std::string& col = header[i];
    if (col.rfind("attr:", 0) != 0 || col.size() <= 5) {
      throw parse_error(where() + ": column '" + col +
                        "' must be named 'attr:<name>'");
    }
    std::string name = col.substr(5);
    if (!seen_attrs.insert(name).second) {
      throw parse_error(where() + ": duplicate attribute column '" + name + "'");
    }
    attr_names.push_back(std::move(name));
  }

  std::vector<WeightedItem> items;
  std::unordered_set<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line, where());
    if (fields.size() != header.size()) {
      throw parse_error(where() + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    WeightedItem item;
    item.id = fields[0];
    if (item.id.empty()) throw parse_error(where() + ": empty id");
    if (!seen_ids.insert(item.id).second) {
      throw parse_error(where() + ": duplicate id '" + item.id + "'");
    }
    const char* begin = fields[1].c_str();
    char* end = nullptr;
    item.weight = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(item.weight) ||
        item.weight <= 0) {
      throw parse_error(where() + ": id '" + item.id +
                        "': weight must be a positive number, got '" +
                        fields[1] + "'");
    }
    for (std::size_t i = 0; i < attr_names.size(); ++i) {
      item.attributes[attr_names[i]] = fields[i + 2];
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) {
    throw parse_error(source_name + ": no records after the header");
  }
  return items;
}

std::vector<WeightedItem> load_items_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return parse_items_csv(in, path);
}

}  // namespace bks
