#include "bks/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "bks/confidence.hpp"
#include "bks/errors.hpp"
#include "bks/sketch.hpp"

namespace bks {

namespace {

const std::vector<std::string>& valid_estimators() {
  static const std::vector<std::string> names = {
      "ws-rc", "pri-rc", "ws-sc", "ws-sc-markov", "ws-prefix"};
  return names;
}

const std::vector<std::string>& valid_bounds() {
  static const std::vector<std::string> names = {
      "ws-total",  "wsr-total",       "pri-total",
      "ws-subpop", "ws-subpop-total", "pri-subpop"};
  return names;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

bool name_in(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double_value(std::string_view key, std::string_view value) {
  const std::string buf(value);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(v)) {
    throw config_error("config key '" + std::string(key) +
                       "': cannot parse '" + buf + "' as a number");
  }
  return v;
}

std::uint64_t parse_u64_value(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || value.empty()) {
    throw config_error("config key '" + std::string(key) +
                       "': cannot parse '" + std::string(value) +
                       "' as a nonnegative integer");
  }
  return v;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const std::string_view part =
        trim(comma == std::string_view::npos ? value : value.substr(0, comma));
    if (!part.empty()) out.emplace_back(part);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<std::size_t> parse_size_list(std::string_view key,
                                         std::string_view value) {
  std::vector<std::size_t> out;
  for (const auto& part : split_list(value)) {
    out.push_back(static_cast<std::size_t>(parse_u64_value(key, part)));
  }
  return out;
}

}  // namespace

std::vector<WeightedItem> gen_weighted_set(const DistributionSpec& dist,
                                           SplitRng& rng) {
  if (dist.n < 1) {
    throw std::invalid_argument("weight distribution needs n >= 1");
  }
  if (dist.kind == DistributionSpec::Kind::pareto &&
      (!(dist.alpha > 0.0) || !std::isfinite(dist.alpha))) {
    throw std::invalid_argument("Pareto shape must be positive and finite");
  }
  std::vector<WeightedItem> items;
  items.reserve(dist.n);
  for (std::size_t i = 0; i < dist.n; ++i) {
    const double u = rng.open01();
    const double w = dist.kind == DistributionSpec::Kind::pareto
                         ? std::pow(u, -1.0 / dist.alpha)
                         : u;
    items.push_back({std::to_string(i), w, {}});
  }
  return items;
}

std::vector<WeightedItem> gen_weighted_set(
    const DistributionSpec& dist, std::span<const std::size_t> group_sizes,
    SplitRng& rng) {
  std::vector<WeightedItem> items = gen_weighted_set(dist, rng);
  for (std::size_t g : group_sizes) group_partition(items, g);
  return items;
}

std::vector<Predicate> group_partition(std::vector<WeightedItem>& items,
                                       std::size_t g) {
  const std::size_t n = items.size();
  if (g < 1 || n == 0 || n % g != 0) {
    throw std::invalid_argument("group size " + std::to_string(g) +
                                " must divide the item count " +
                                std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&items](std::size_t a, std::size_t b) {
                     if (items[a].weight != items[b].weight) {
                       return items[a].weight < items[b].weight;
                     }
                     return items[a].id < items[b].id;
                   });
  const std::string attr = "g" + std::to_string(g);
  for (std::size_t pos = 0; pos < n; ++pos) {
    items[order[pos]].attributes[attr] = std::to_string(pos / g);
  }
  std::vector<Predicate> predicates;
  predicates.reserve(n / g);
  for (std::size_t idx = 0; idx < n / g; ++idx) {
    predicates.push_back(Predicate::attribute_equals(attr, std::to_string(idx)));
  }
  return predicates;
}

void ExperimentConfig::validate() const {
  if (distribution.n < 1) throw config_error("n must be at least 1");
  if (distribution.kind == DistributionSpec::Kind::pareto &&
      (!(distribution.alpha > 0.0) || !std::isfinite(distribution.alpha))) {
    throw config_error("alpha must be positive and finite");
  }
  if (repetitions < 1) throw config_error("reps must be at least 1");
  if (k_values.empty()) throw config_error("at least one k value is required");
  for (std::size_t k : k_values) {
    if (k < 1) throw config_error("k values must be at least 1");
  }
  for (std::size_t g : group_sizes) {
    if (g < 1 || distribution.n % g != 0) {
      throw config_error("group size " + std::to_string(g) +
                         " must divide n=" + std::to_string(distribution.n));
    }
  }
  if (!(delta > 0.0) || !(delta < 0.5)) {
    throw config_error("delta must lie in (0, 0.5)");
  }
  if (sc_params.permnum < 1 || sc_params.inperm < 1) {
    throw config_error("permnum and inperm must be at least 1");
  }
  if (bound_draws < 1) throw config_error("draws must be at least 1");
  try {
    ws_bound_method_from_name(ws_bound_method);
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("ws_method: ") + e.what());
  }
  for (const auto& name : estimators) {
    if (!name_in(valid_estimators(), name)) {
      throw config_error("unknown estimator '" + name +
                         "' (valid: " + join_names(valid_estimators()) + ")");
    }
  }
  for (const auto& name : bounds) {
    if (!name_in(valid_bounds(), name)) {
      throw config_error("unknown bound '" + name +
                         "' (valid: " + join_names(valid_bounds()) + ")");
    }
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto newline = text.find('\n');
    std::string_view line =
        newline == std::string_view::npos ? text : text.substr(0, newline);
    text.remove_prefix(newline == std::string_view::npos ? text.size()
                                                         : newline + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw config_error("line " + std::to_string(line_no) +
                         ": expected key=value, got '" + std::string(line) +
                         "'");
    }
    const std::string key{trim(line.substr(0, eq))};
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "dist") {
      if (value == "pareto") {
        cfg.distribution.kind = DistributionSpec::Kind::pareto;
      } else if (value == "uniform") {
        cfg.distribution.kind = DistributionSpec::Kind::uniform;
      } else {
        throw config_error("config key 'dist': expected pareto or uniform");
      }
    } else if (key == "alpha") {
      cfg.distribution.alpha = parse_double_value(key, value);
    } else if (key == "n") {
      cfg.distribution.n =
          static_cast<std::size_t>(parse_u64_value(key, value));
    } else if (key == "k") {
      cfg.k_values = parse_size_list(key, value);
    } else if (key == "g") {
      cfg.group_sizes = parse_size_list(key, value);
    } else if (key == "reps") {
      cfg.repetitions = static_cast<int>(parse_u64_value(key, value));
    } else if (key == "estimators") {
      cfg.estimators = split_list(value);
    } else if (key == "bounds") {
      cfg.bounds = split_list(value);
    } else if (key == "delta") {
      cfg.delta = parse_double_value(key, value);
    } else if (key == "permnum") {
      cfg.sc_params.permnum = static_cast<int>(parse_u64_value(key, value));
    } else if (key == "inperm") {
      cfg.sc_params.inperm = static_cast<int>(parse_u64_value(key, value));
    } else if (key == "draws") {
      cfg.bound_draws = static_cast<int>(parse_u64_value(key, value));
    } else if (key == "ws_method") {
      cfg.ws_bound_method = std::string(value);
    } else if (key == "seed") {
      cfg.seed = parse_u64_value(key, value);
    } else {
      throw config_error(
          "line " + std::to_string(line_no) + ": unknown config key '" + key +
          "' (valid: dist, alpha, n, k, g, reps, estimators, bounds, delta, "
          "permnum, inperm, draws, ws_method, seed)");
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

struct GroupSetup {
  std::size_t g = 0;
  std::string attr;
  std::vector<double> true_weights;
  std::vector<Predicate> predicates;
};

struct Workspace {
  std::vector<WeightedItem> items;
  double total_weight = 0.0;
  std::vector<GroupSetup> groups;
};

std::size_t group_index(const AttributeMap& attrs, const std::string& attr) {
  const auto it = attrs.find(attr);
  if (it == attrs.end()) {
    throw std::logic_error("item lacks group attribute " + attr);
  }
  return static_cast<std::size_t>(std::stoul(it->second));
}

Workspace make_workspace(const ExperimentConfig& cfg, SplitRng& root) {
  Workspace w;
  SplitRng gen = root.split(0);
  w.items = gen_weighted_set(cfg.distribution, gen);
  for (const auto& item : w.items) w.total_weight += item.weight;
  for (std::size_t g : cfg.group_sizes) {
    GroupSetup gs;
    gs.g = g;
    gs.attr = "g" + std::to_string(g);
    gs.predicates = group_partition(w.items, g);
    gs.true_weights.assign(w.items.size() / g, 0.0);
    for (const auto& item : w.items) {
      gs.true_weights[group_index(item.attributes, gs.attr)] += item.weight;
    }
    w.groups.push_back(std::move(gs));
  }
  return w;
}

}  // namespace

MetricsTable run_estimator_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.estimators.empty()) {
    throw config_error("no estimators configured");
  }
  SplitRng root(cfg.seed);
  const Workspace w = make_workspace(cfg, root);
  const double W = w.total_weight;
  const std::size_t n = w.items.size();
  const std::size_t M = cfg.estimators.size();
  const std::size_t K = cfg.k_values.size();
  const std::size_t G = w.groups.size();
  bool need_ws = false;
  bool need_pri = false;
  for (const auto& name : cfg.estimators) {
    (name == "pri-rc" ? need_pri : need_ws) = true;
  }
  // accumulators over repetitions
  std::vector<double> total_abs_rel(M * K, 0.0);
  std::vector<double> sq_sum(M * K * G, 0.0);
  std::vector<double> norm_sq_sum(M * K * G, 0.0);
  std::vector<std::vector<double>> abs_rel(M * K * G);
  for (std::size_t mi = 0; mi < M; ++mi) {
    for (std::size_t ki = 0; ki < K; ++ki) {
      for (std::size_t gi = 0; gi < G; ++gi) {
        abs_rel[(mi * K + ki) * G + gi].assign(w.groups[gi].true_weights.size(),
                                               0.0);
      }
    }
  }
  std::vector<double> est_buf;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    SplitRng rep_rng = root.split(static_cast<std::uint64_t>(rep) + 1);
    for (std::size_t ki = 0; ki < K; ++ki) {
      const std::size_t k = cfg.k_values[ki];
      std::optional<BottomKSketch> ws_sk;
      std::optional<BottomKSketch> pri_sk;
      if (need_ws) {
        SplitRng r = rep_rng.split(ki * 8 + 0);
        ws_sk = build_bottom_k(w.items, k, RankFamily::exponential, r);
      }
      if (need_pri) {
        SplitRng r = rep_rng.split(ki * 8 + 1);
        pri_sk = build_bottom_k(w.items, k, RankFamily::priority, r);
      }
      SplitRng markov_rng = rep_rng.split(ki * 8 + 2);
      for (std::size_t mi = 0; mi < M; ++mi) {
        const std::string& name = cfg.estimators[mi];
        AdjustedWeightAssignment awa;
        try {
          if (name == "ws-rc") {
            awa = rc_adjusted_weights(*ws_sk);
          } else if (name == "pri-rc") {
            awa = rc_adjusted_weights(*pri_sk);
          } else if (name == "ws-sc") {
            awa = sc_adjusted_weights_exact(*ws_sk, W);
          } else if (name == "ws-sc-markov") {
            awa = sc_adjusted_weights_markov(*ws_sk, W, cfg.sc_params,
                                             markov_rng);
          } else {
            awa = prefix_adjusted_weights(*ws_sk, W);
          }
        } catch (const capability_error& e) {
          throw config_error("estimator '" + name +
                             "' at k=" + std::to_string(k) + ": " + e.what());
        }
        double total_est = 0.0;
        for (double a : awa.adjusted) total_est += a;
        total_abs_rel[mi * K + ki] += std::abs(total_est - W) / W;
        for (std::size_t gi = 0; gi < G; ++gi) {
          const GroupSetup& gs = w.groups[gi];
          est_buf.assign(gs.true_weights.size(), 0.0);
          for (std::size_t ei = 0; ei < awa.entries.size(); ++ei) {
            est_buf[group_index(awa.entries[ei].attributes, gs.attr)] +=
                awa.adjusted[ei];
          }
          const std::size_t cell = (mi * K + ki) * G + gi;
          double sq = 0.0;
          double nsq = 0.0;
          for (std::size_t idx = 0; idx < est_buf.size(); ++idx) {
            const double err = est_buf[idx] - gs.true_weights[idx];
            sq += err * err;
            const double rel = err / gs.true_weights[idx];
            nsq += rel * rel;
            abs_rel[cell][idx] += std::abs(rel);
          }
          sq_sum[cell] += sq;
          norm_sq_sum[cell] += nsq;
        }
      }
    }
  }
  MetricsTable table;
  table.repetitions = cfg.repetitions;
  const double R = static_cast<double>(cfg.repetitions);
  for (std::size_t mi = 0; mi < M; ++mi) {
    const std::string& name = cfg.estimators[mi];
    for (std::size_t ki = 0; ki < K; ++ki) {
      const std::size_t k = cfg.k_values[ki];
      table.rows.push_back({name, k, n, "total", "mean_abs_rel_error",
                            total_abs_rel[mi * K + ki] / R});
      for (std::size_t gi = 0; gi < G; ++gi) {
        const GroupSetup& gs = w.groups[gi];
        const std::size_t cell = (mi * K + ki) * G + gi;
        double cross = 0.0;
        for (std::size_t idx = 0; idx < abs_rel[cell].size(); ++idx) {
          const double mean = abs_rel[cell][idx] / R;
          cross += mean;
          table.rows.push_back({name, k, gs.g, std::to_string(idx),
                                "mean_abs_rel_error", mean});
        }
        table.rows.push_back(
            {name, k, gs.g, "all", "mean_abs_rel_error",
             cross / static_cast<double>(abs_rel[cell].size())});
        table.rows.push_back(
            {name, k, gs.g, "all", "sq_error_sum", sq_sum[cell] / R});
        table.rows.push_back({name, k, gs.g, "all", "norm_sq_error_sum",
                              norm_sq_sum[cell] / R});
      }
    }
  }
  return table;
}

namespace {

struct BoundAcc {
  double hits = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double width = 0.0;

  void add(const ConfidenceInterval& ci, double truth) {
    if (ci.lower <= truth && truth <= ci.upper) hits += 1.0;
    lower += ci.lower / truth;
    upper += ci.upper / truth;
    width += (ci.upper - ci.lower) / truth;
  }
};

void emit_bound_rows(MetricsTable& table, const std::string& method,
                     std::size_t k, std::size_t g, const std::string& group,
                     const BoundAcc& acc, double denom) {
  table.rows.push_back(
      {method, k, g, group, "in_bounds_rate", acc.hits / denom});
  table.rows.push_back(
      {method, k, g, group, "mean_norm_lower", acc.lower / denom});
  table.rows.push_back(
      {method, k, g, group, "mean_norm_upper", acc.upper / denom});
  table.rows.push_back(
      {method, k, g, group, "mean_norm_width", acc.width / denom});
}

}  // namespace

MetricsTable run_bounds_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.bounds.empty()) {
    throw config_error("no bounds configured");
  }
  SplitRng root(cfg.seed);
  const Workspace w = make_workspace(cfg, root);
  const double W = w.total_weight;
  const std::size_t n = w.items.size();
  const std::size_t M = cfg.bounds.size();
  const std::size_t K = cfg.k_values.size();
  const std::size_t G = w.groups.size();
  const WsBoundMethod ws_method =
      ws_bound_method_from_name(cfg.ws_bound_method);
  bool need_ws = false;
  bool need_pri = false;
  bool need_kmins = false;
  bool need_groups = false;
  for (const auto& name : cfg.bounds) {
    if (name == "ws-total" || name == "ws-subpop" || name == "ws-subpop-total") {
      need_ws = true;
    }
    if (name == "pri-total" || name == "pri-subpop") need_pri = true;
    if (name == "wsr-total") need_kmins = true;
    if (name == "ws-subpop" || name == "ws-subpop-total" ||
        name == "pri-subpop") {
      need_groups = true;
    }
  }
  if (need_groups && G == 0) {
    throw config_error("subpopulation bounds need at least one group size g");
  }
  std::vector<BoundAcc> total_acc(M * K);
  std::vector<std::vector<BoundAcc>> sub_acc(M * K * G);
  for (std::size_t mi = 0; mi < M; ++mi) {
    for (std::size_t ki = 0; ki < K; ++ki) {
      for (std::size_t gi = 0; gi < G; ++gi) {
        sub_acc[(mi * K + ki) * G + gi].assign(
            w.groups[gi].true_weights.size(), BoundAcc{});
      }
    }
  }
  const Predicate everything = Predicate::match_all();
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    SplitRng rep_rng = root.split(static_cast<std::uint64_t>(rep) + 1);
    for (std::size_t ki = 0; ki < K; ++ki) {
      const std::size_t k = cfg.k_values[ki];
      std::optional<BottomKSketch> ws_sk;
      std::optional<BottomKSketch> pri_sk;
      std::optional<KMinsSketch> kmins;
      if (need_ws) {
        SplitRng r = rep_rng.split(ki * 8 + 0);
        ws_sk = build_bottom_k(w.items, k, RankFamily::exponential, r);
      }
      if (need_pri) {
        SplitRng r = rep_rng.split(ki * 8 + 1);
        pri_sk = build_bottom_k(w.items, k, RankFamily::priority, r);
      }
      if (need_kmins) {
        SplitRng r = rep_rng.split(ki * 8 + 2);
        kmins = build_k_mins(w.items, k, r);
      }
      SplitRng bounds_rng = rep_rng.split(ki * 8 + 3);
      for (std::size_t mi = 0; mi < M; ++mi) {
        const std::string& name = cfg.bounds[mi];
        try {
          if (name == "ws-total") {
            total_acc[mi * K + ki].add(
                ws_bounds_total(*ws_sk, cfg.delta, ws_method, &bounds_rng,
                                cfg.bound_draws),
                W);
          } else if (name == "wsr-total") {
            total_acc[mi * K + ki].add(wsr_bounds_total(*kmins, cfg.delta), W);
          } else if (name == "pri-total") {
            total_acc[mi * K + ki].add(
                pri_bounds_subpop(*pri_sk, everything, cfg.delta), W);
          } else {
            for (std::size_t gi = 0; gi < G; ++gi) {
              const GroupSetup& gs = w.groups[gi];
              auto& accs = sub_acc[(mi * K + ki) * G + gi];
              for (std::size_t idx = 0; idx < gs.predicates.size(); ++idx) {
                ConfidenceInterval ci;
                if (name == "ws-subpop") {
                  ci = ws_bounds_subpop(*ws_sk, gs.predicates[idx], cfg.delta,
                                        ws_method, &bounds_rng,
                                        cfg.bound_draws);
                } else if (name == "ws-subpop-total") {
                  ci = ws_bounds_subpop_with_total(*ws_sk, gs.predicates[idx],
                                                   W, cfg.delta,
                                                   cfg.bound_draws, bounds_rng);
                } else {
                  ci = pri_bounds_subpop(*pri_sk, gs.predicates[idx],
                                         cfg.delta);
                }
                accs[idx].add(ci, gs.true_weights[idx]);
              }
            }
          }
        } catch (const capability_error& e) {
          throw config_error("bound '" + name + "' at k=" + std::to_string(k) +
                             ": " + e.what());
        }
      }
    }
  }
  MetricsTable table;
  table.repetitions = cfg.repetitions;
  const double R = static_cast<double>(cfg.repetitions);
  for (std::size_t mi = 0; mi < M; ++mi) {
    const std::string& name = cfg.bounds[mi];
    const bool is_total =
        name == "ws-total" || name == "wsr-total" || name == "pri-total";
    for (std::size_t ki = 0; ki < K; ++ki) {
      const std::size_t k = cfg.k_values[ki];
      if (is_total) {
        emit_bound_rows(table, name, k, n, "total", total_acc[mi * K + ki], R);
        continue;
      }
      for (std::size_t gi = 0; gi < G; ++gi) {
        const GroupSetup& gs = w.groups[gi];
        const auto& accs = sub_acc[(mi * K + ki) * G + gi];
        BoundAcc cross;
        for (std::size_t idx = 0; idx < accs.size(); ++idx) {
          emit_bound_rows(table, name, k, gs.g, std::to_string(idx), accs[idx],
                          R);
          cross.hits += accs[idx].hits;
          cross.lower += accs[idx].lower;
          cross.upper += accs[idx].upper;
          cross.width += accs[idx].width;
        }
        emit_bound_rows(table, name, k, gs.g, "all", cross,
                        R * static_cast<double>(accs.size()));
      }
    }
  }
  return table;
}

void write_metrics_csv(const MetricsTable& table, std::ostream& out) {
  out << "# columns: method,k,g,group,metric,reps,value\n"
         "# group: chunk index within the g-partition; 'all' is the "
         "cross-group mean; 'total' rows cover the whole item set\n"
         "method,k,g,group,metric,reps,value\n";
  char buf[64];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.method << ',' << r.k << ',' << r.g << ',' << r.group << ','
        << r.metric << ',' << table.repetitions << ',' << buf << '\n';
  }
}

}  // namespace bks
