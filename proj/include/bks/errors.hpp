#pragma once

#include <stdexcept>
#include <string>

namespace bks {

// Requested operation is outside what the sketch kind, rank family, or size
// cap supports (for example exact subset conditioning beyond k = 20).
class capability_error : public std::runtime_error {
 public:
  explicit capability_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed serialized sketch, CSV file, or predicate expression.
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent or unknown experiment configuration.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bks
