#include "bksketch.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>

#include "bks/codec.hpp"
#include "bks/confidence.hpp"
#include "bks/errors.hpp"
#include "bks/estimators.hpp"
#include "bks/predicate.hpp"
#include "bks/rng.hpp"
#include "bks/simulation.hpp"
#include "bks/sketch.hpp"

struct bks_items {
  std::vector<bks::WeightedItem> items;
};

struct bks_sketch {
  bks::AnySketch sketch;
};

namespace {

void fill_err(char* errbuf, size_t errbuf_len, const char* msg) {
  if (errbuf == nullptr || errbuf_len == 0) return;
  std::snprintf(errbuf, errbuf_len, "%s", msg);
}

// Maps library exceptions onto status codes; most-derived classes first.
template <typename Body>
bks_status guarded(char* errbuf, size_t errbuf_len, Body&& body) {
  try {
    body();
    return BKS_OK;
  } catch (const bks::capability_error& e) {
    fill_err(errbuf, errbuf_len, e.what());
    return BKS_ERR_CAPABILITY;
  } catch (const bks::config_error& e) {
    fill_err(errbuf, errbuf_len, e.what());
    return BKS_ERR_CONFIG;
  } catch (const bks::parse_error& e) {
    fill_err(errbuf, errbuf_len, e.what());
    return BKS_ERR_INPUT;
  } catch (const std::invalid_argument& e) {
    fill_err(errbuf, errbuf_len, e.what());
    return BKS_ERR_INPUT;
  } catch (const std::domain_error& e) {
    fill_err(errbuf, errbuf_len, e.what());
    return BKS_ERR_INPUT;
  } catch (const std::exception& e) {
    fill_err(errbuf, errbuf_len, e.what());
    return BKS_ERR_INTERNAL;
  } catch (...) {
    fill_err(errbuf, errbuf_len, "unknown failure");
    return BKS_ERR_INTERNAL;
  }
}

bks_status null_argument(char* errbuf, size_t errbuf_len, const char* what) {
  fill_err(errbuf, errbuf_len, what);
  return BKS_ERR_INPUT;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bks::Predicate parse_predicate(const char* text) {
  if (text == nullptr || *text == '\0') return bks::Predicate::match_all();
  return bks::Predicate::parse(text);
}

// A caller-supplied positive total wins; otherwise fall back to the total
// recorded in the sketch document.
std::optional<double> resolve_total(const bks::AnySketch& sketch,
                                    double override_value) {
  if (override_value > 0) return override_value;
  return std::visit([](const auto& s) { return s.total_weight; }, sketch);
}

void require_family(const bks::BottomKSketch& sketch, bks::RankFamily family,
                    const std::string& method) {
  if (sketch.family != family) {
    throw bks::capability_error(
        "method '" + method + "' needs a " +
        std::string(bks::family_name(family)) + "-rank sketch, got " +
        bks::family_name(sketch.family));
  }
}

double require_total(const std::optional<double>& total,
                     const std::string& method) {
  if (!total.has_value()) {
    throw bks::capability_error(
        "method '" + method +
        "' requires the total weight (stored in the sketch or passed "
        "explicitly)");
  }
  return *total;
}

}  // namespace

extern "C" {

const char* bks_version(void) { return "1.0.0"; }

void bks_string_free(char* s) { std::free(s); }

bks_status bks_items_load_csv(const char* path, bks_items** out, char* errbuf,
                              size_t errbuf_len) {
  if (path == nullptr || out == nullptr) {
    return null_argument(errbuf, errbuf_len, "null path or output handle");
  }
  return guarded(errbuf, errbuf_len, [&] {
    auto items = bks::load_items_csv(path);
    *out = new bks_items{std::move(items)};
  });
}

bks_status bks_items_parse_csv(const char* text, const char* source_name,
                               bks_items** out, char* errbuf,
                               size_t errbuf_len) {
  if (text == nullptr || out == nullptr) {
    return null_argument(errbuf, errbuf_len, "null text or output handle");
  }
  return guarded(errbuf, errbuf_len, [&] {
    std::istringstream in{std::string(text)};
    auto items = bks::parse_items_csv(
        in, source_name == nullptr ? "<memory>" : source_name);
    *out = new bks_items{std::move(items)};
  });
}

void bks_items_free(bks_items* items) { delete items; }

size_t bks_items_count(const bks_items* items) {
  return items == nullptr ? 0 : items->items.size();
}

double bks_items_total_weight(const bks_items* items) {
  if (items == nullptr) return 0;
  double total = 0;
  for (const auto& item : items->items) total += item.weight;
  return total;
}

bks_status bks_sketch_build(const bks_items* items, size_t k,
                            const char* family, uint64_t seed, int streaming,
                            bks_sketch** out, char* errbuf,
                            size_t errbuf_len) {
  if (items == nullptr || family == nullptr || out == nullptr) {
    return null_argument(errbuf, errbuf_len,
                         "null items, family, or output handle");
  }
  return guarded(errbuf, errbuf_len, [&] {
    bks::SplitRng rng(seed);
    if (std::strcmp(family, "wsr") == 0) {
      *out = new bks_sketch{bks::build_k_mins(items->items, k, rng)};
      return;
    }
    const bks::RankFamily fam = bks::family_from_name(family);
    auto sketch = streaming != 0
                      ? bks::build_bottom_k_stream(items->items, k, fam, rng)
                      : bks::build_bottom_k(items->items, k, fam, rng);
    *out = new bks_sketch{std::move(sketch)};
  });
}

bks_status bks_sketch_merge(const bks_sketch* a, const bks_sketch* b, size_t k,
                            bks_sketch** out, char* errbuf,
                            size_t errbuf_len) {
  if (a == nullptr || b == nullptr || out == nullptr) {
    return null_argument(errbuf, errbuf_len,
                         "null sketch or output handle");
  }
  return guarded(errbuf, errbuf_len, [&] {
    const auto* ba = std::get_if<bks::BottomKSketch>(&a->sketch);
    const auto* bb = std::get_if<bks::BottomKSketch>(&b->sketch);
    if (ba == nullptr || bb == nullptr) {
      throw bks::capability_error("only bottom-k sketches can be merged");
    }
    *out = new bks_sketch{bks::merge_sketches(*ba, *bb, k)};
  });
}

void bks_sketch_free(bks_sketch* sketch) { delete sketch; }

bks_status bks_sketch_save(const bks_sketch* sketch, const char* path,
                           char* errbuf, size_t errbuf_len) {
  if (sketch == nullptr || path == nullptr) {
    return null_argument(errbuf, errbuf_len, "null sketch or path");
  }
  return guarded(errbuf, errbuf_len,
                 [&] { bks::save_sketch(sketch->sketch, path); });
}

bks_status bks_sketch_load(const char* path, bks_sketch** out, char* errbuf,
                           size_t errbuf_len) {
  if (path == nullptr || out == nullptr) {
    return null_argument(errbuf, errbuf_len, "null path or output handle");
  }
  return guarded(errbuf, errbuf_len,
                 [&] { *out = new bks_sketch{bks::load_sketch(path)}; });
}

bks_status bks_sketch_to_json(const bks_sketch* sketch, char** out,
                              char* errbuf, size_t errbuf_len) {
  if (sketch == nullptr || out == nullptr) {
    return null_argument(errbuf, errbuf_len, "null sketch or output handle");
  }
  return guarded(errbuf, errbuf_len,
                 [&] { *out = dup_string(bks::sketch_to_json(sketch->sketch)); });
}

int bks_sketch_is_kmins(const bks_sketch* sketch) {
  return sketch != nullptr &&
         std::holds_alternative<bks::KMinsSketch>(sketch->sketch);
}

size_t bks_sketch_k(const bks_sketch* sketch) {
  if (sketch == nullptr) return 0;
  return std::visit([](const auto& s) { return s.k; }, sketch->sketch);
}

size_t bks_sketch_entry_count(const bks_sketch* sketch) {
  if (sketch == nullptr) return 0;
  if (const auto* b = std::get_if<bks::BottomKSketch>(&sketch->sketch)) {
    return b->entries.size();
  }
  return std::get<bks::KMinsSketch>(sketch->sketch).mins.size();
}

const char* bks_sketch_family(const bks_sketch* sketch) {
  if (sketch == nullptr) return "";
  if (const auto* b = std::get_if<bks::BottomKSketch>(&sketch->sketch)) {
    return bks::family_name(b->family);
  }
  return "wsr";
}

double bks_sketch_retained_weight(const bks_sketch* sketch) {
  if (sketch == nullptr) return 0;
  if (const auto* b = std::get_if<bks::BottomKSketch>(&sketch->sketch)) {
    return b->retained_weight();
  }
  const auto& km = std::get<bks::KMinsSketch>(sketch->sketch);
  double total = 0;
  std::set<std::string> seen;
  for (const auto& entry : km.mins) {
    if (seen.insert(entry.id).second) total += entry.weight;
  }
  return total;
}

int bks_sketch_threshold_rank(const bks_sketch* sketch, double* out) {
  if (sketch == nullptr) return 0;
  const auto* b = std::get_if<bks::BottomKSketch>(&sketch->sketch);
  if (b == nullptr || !b->r_k_plus_1.has_value()) return 0;
  if (out != nullptr) *out = *b->r_k_plus_1;
  return 1;
}

int bks_sketch_total_weight(const bks_sketch* sketch, double* out) {
  if (sketch == nullptr) return 0;
  const auto total =
      std::visit([](const auto& s) { return s.total_weight; }, sketch->sketch);
  if (!total.has_value()) return 0;
  if (out != nullptr) *out = *total;
  return 1;
}

bks_status bks_estimate(const bks_sketch* sketch,
                        const bks_estimate_opts* opts, double* out,
                        char* errbuf, size_t errbuf_len) {
  if (sketch == nullptr || opts == nullptr || opts->method == nullptr ||
      out == nullptr) {
    return null_argument(errbuf, errbuf_len,
                         "null sketch, options, method, or output");
  }
  return guarded(errbuf, errbuf_len, [&] {
    const std::string method = opts->method;
    const bks::Predicate pred = parse_predicate(opts->predicate);
    const std::optional<double> total =
        resolve_total(sketch->sketch, opts->total_weight);
    if (const auto* km = std::get_if<bks::KMinsSketch>(&sketch->sketch)) {
      if (method == "wsr") {
        if (pred.is_match_all()) {
          *out = bks::wsr_total_weight(*km).unbiased;
        } else {
          *out = bks::wsr_subpop_with_total(*km, pred,
                                            require_total(total, method))
                     .horvitz_thompson;
        }
      } else if (method == "wsr-ml") {
        if (!pred.is_match_all()) {
          throw bks::capability_error(
              "method 'wsr-ml' estimates the total weight only");
        }
        *out = bks::wsr_total_weight(*km).maximum_likelihood;
      } else if (method == "wsr-ratio") {
        *out = bks::wsr_subpop_with_total(*km, pred,
                                          require_total(total, method))
                   .ratio;
      } else {
        throw bks::capability_error("method '" + method +
                                    "' does not apply to k-mins sketches");
      }
      return;
    }
    const auto& b = std::get<bks::BottomKSketch>(sketch->sketch);
    const bks::MarkovParams params{opts->permnum > 0 ? opts->permnum : 20,
                                   opts->inperm > 0 ? opts->inperm : 20};
    bks::SplitRng rng(opts->seed);
    if (method == "ml") {
      bks::SplitRng* redraw_rng = opts->redraws > 0 ? &rng : nullptr;
      if (pred.is_match_all()) {
        // A known total would make this estimate trivially the total itself;
        // the full-set estimate always comes from the ranks alone.
        *out = bks::ml_total_weight(b, opts->redraws, redraw_rng);
      } else if (!total.has_value()) {
        *out = bks::ml_subpop(b, pred, opts->redraws, redraw_rng);
      } else {
        *out = bks::ml_subpop_with_total(b, pred, *total, opts->redraws,
                                         redraw_rng);
      }
      return;
    }
    bks::AdjustedWeightAssignment assignment;
    if (method == "ws-rc") {
      require_family(b, bks::RankFamily::exponential, method);
      assignment = bks::rc_adjusted_weights(b);
    } else if (method == "pri-rc") {
      require_family(b, bks::RankFamily::priority, method);
      assignment = bks::rc_adjusted_weights(b);
    } else if (method == "ws-sc") {
      require_family(b, bks::RankFamily::exponential, method);
      assignment = bks::sc_adjusted_weights_exact(b, require_total(total, method));
    } else if (method == "ws-sc-markov") {
      require_family(b, bks::RankFamily::exponential, method);
      assignment = bks::sc_adjusted_weights_markov(
          b, require_total(total, method), params, rng);
    } else if (method == "ws-prefix") {
      require_family(b, bks::RankFamily::exponential, method);
      assignment = bks::prefix_adjusted_weights(b, require_total(total, method));
    } else {
      throw bks::config_error(
          "unknown estimator '" + method +
          "' (valid: ws-rc, pri-rc, ws-sc, ws-sc-markov, ws-prefix, ml, wsr, "
          "wsr-ml, wsr-ratio)");
    }
    *out = bks::estimate_subpop(assignment, pred);
  });
}

bks_status bks_bounds(const bks_sketch* sketch, const bks_bounds_opts* opts,
                      double* out_lower, double* out_upper, char* errbuf,
                      size_t errbuf_len) {
  if (sketch == nullptr || opts == nullptr || opts->method == nullptr ||
      out_lower == nullptr || out_upper == nullptr) {
    return null_argument(errbuf, errbuf_len,
                         "null sketch, options, method, or output");
  }
  return guarded(errbuf, errbuf_len, [&] {
    const std::string method = opts->method;
    const bks::Predicate pred = parse_predicate(opts->predicate);
    const double delta = opts->delta > 0 ? opts->delta : 0.05;
    if (!(delta < 0.5)) {
      throw bks::config_error("delta must lie in (0, 0.5)");
    }
    const int draws = opts->draws > 0 ? opts->draws : bks::kDefaultBoundDraws;
    bks::ConfidenceInterval ci;
    if (const auto* km = std::get_if<bks::KMinsSketch>(&sketch->sketch)) {
      if (method != "wsr") {
        throw bks::capability_error("method '" + method +
                                    "' does not apply to k-mins sketches");
      }
      if (!pred.is_match_all()) {
        throw bks::capability_error(
            "k-mins bounds cover the total weight only");
      }
      ci = bks::wsr_bounds_total(*km, delta);
    } else {
      const auto& b = std::get<bks::BottomKSketch>(sketch->sketch);
      bks::SplitRng rng(opts->seed);
      if (method == "ws-normal" || method == "ws-quantile" ||
          method == "ws-density") {
        const bks::WsBoundMethod m =
            bks::ws_bound_method_from_name(method.substr(3));
        ci = pred.is_match_all()
                 ? bks::ws_bounds_total(b, delta, m, &rng, draws)
                 : bks::ws_bounds_subpop(b, pred, delta, m, &rng, draws);
      } else if (method == "ws-lex") {
        const double total = require_total(
            resolve_total(sketch->sketch, opts->total_weight), method);
        ci = bks::ws_bounds_subpop_with_total(b, pred, total, delta, draws,
                                              rng);
      } else if (method == "pri") {
        ci = bks::pri_bounds_subpop(b, pred, delta);
      } else if (method == "wsr") {
        throw bks::capability_error(
            "method 'wsr' needs a k-mins sketch, got a bottom-k sketch");
      } else {
        throw bks::config_error(
            "unknown bounds method '" + method +
            "' (valid: ws-normal, ws-quantile, ws-density, ws-lex, pri, "
            "wsr)");
      }
    }
    *out_lower = ci.lower;
    *out_upper = ci.upper;
  });
}

bks_status bks_simulate(const char* config_text, const char* mode,
                        char** out_csv, char* errbuf, size_t errbuf_len) {
  if (config_text == nullptr || mode == nullptr || out_csv == nullptr) {
    return null_argument(errbuf, errbuf_len,
                         "null config, mode, or output handle");
  }
  return guarded(errbuf, errbuf_len, [&] {
    const bks::ExperimentConfig cfg = bks::parse_config(config_text);
    const std::string mode_name = mode;
    bks::MetricsTable table;
    if (mode_name == "estimators") {
      table = bks::run_estimator_experiment(cfg);
    } else if (mode_name == "bounds") {
      table = bks::run_bounds_experiment(cfg);
    } else {
      throw bks::config_error("mode must be 'estimators' or 'bounds'");
    }
    std::ostringstream out;
    bks::write_metrics_csv(table, out);
    *out_csv = dup_string(out.str());
  });
}

}  // extern "C"
