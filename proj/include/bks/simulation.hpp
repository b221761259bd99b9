#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bks/estimators.hpp"
#include "bks/predicate.hpp"
#include "bks/rng.hpp"
#include "bks/types.hpp"

namespace bks {

struct DistributionSpec {
  enum class Kind { pareto, uniform };
  Kind kind = Kind::pareto;
  double alpha = 1.2;    // Pareto shape; ignored for uniform
  std::size_t n = 1000;  // number of items
};

// Weights drawn i.i.d.: Pareto variates u^(-1/alpha) with scale 1, or
// uniform variates in (0, 1).  Items are id'd "0".."n-1".
std::vector<WeightedItem> gen_weighted_set(const DistributionSpec& dist,
                                           SplitRng& rng);

// As above, additionally tagging every item with its group index under each
// of the given partition sizes.
std::vector<WeightedItem> gen_weighted_set(
    const DistributionSpec& dist, std::span<const std::size_t> group_sizes,
    SplitRng& rng);

// Orders the items by weight, splits them into consecutive chunks of g,
// stores each item's chunk index in attribute "g<g>", and returns one
// equality predicate per chunk.  g must divide the item count.
std::vector<Predicate> group_partition(std::vector<WeightedItem>& items,
                                       std::size_t g);

struct ExperimentConfig {
  DistributionSpec distribution;
  std::vector<std::size_t> k_values = {4, 16, 40, 100, 500};
  std::vector<std::size_t> group_sizes;  // empty: whole set only
  int repetitions = 500;
  std::vector<std::string> estimators = {"ws-rc", "pri-rc"};
  std::vector<std::string> bounds = {"ws-total", "wsr-total", "pri-total"};
  double delta = 0.05;
  MarkovParams sc_params;
  int bound_draws = 200;
  std::string ws_bound_method = "quantile";
  std::uint64_t seed = 123456789;

  void validate() const;  // throws config_error
};

// Parses "key=value" lines ('#' starts a comment; blank lines ignored) into
// a config; unknown keys or names raise config_error listing the valid ones.
ExperimentConfig parse_config(std::string_view text);

struct MetricRow {
  std::string method;
  std::size_t k = 0;
  std::size_t g = 0;
  std::string group;   // chunk index, "all" (cross-group mean) or "total"
  std::string metric;
  double value = 0.0;
};

struct MetricsTable {
  int repetitions = 0;
  std::vector<MetricRow> rows;
};

// Estimator-quality sweep: one fixed weight set, fresh sketches per
// repetition, per-group and per-total error aggregates for each configured
// estimator, k, and partition size.  Deterministic under the seed; each
// repetition draws from its own split stream, so results do not depend on
// evaluation order.
MetricsTable run_estimator_experiment(const ExperimentConfig& config);

// Coverage and width sweep for the configured bound methods, with the same
// determinism contract.
MetricsTable run_bounds_experiment(const ExperimentConfig& config);

// One row per (method, k, g, group, metric); columns documented in a header
// comment.  Values use 17 significant digits so reruns are byte-identical.
void write_metrics_csv(const MetricsTable& table, std::ostream& out);

}  // namespace bks
