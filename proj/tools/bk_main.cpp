// Command-line front door for the sketch library.  Every subcommand is a
// thin wrapper over the C API; numeric behavior lives in the library.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bksketch.h"

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

int fail(const char* command, bks_status status, const char* message) {
  std::fprintf(stderr, "bk %s: %s\n", command, message);
  return static_cast<int>(status);
}

struct SketchArgs {
  std::string input;
  std::vector<std::string> merge;
  std::size_t k = 0;
  std::string family = "ws";
  std::uint64_t seed = kDefaultSeed;
  bool stream = false;
  std::string output;
};

int run_sketch(const SketchArgs& args) {
  char err[512] = {};
  bks_sketch* sketch = nullptr;
  if (!args.merge.empty()) {
    if (!args.input.empty()) {
      std::fprintf(stderr, "bk sketch: --input and --merge are exclusive\n");
      return 2;
    }
    bks_sketch* acc = nullptr;
    for (const auto& path : args.merge) {
      bks_sketch* next = nullptr;
      if (auto st = bks_sketch_load(path.c_str(), &next, err, sizeof err)) {
        bks_sketch_free(acc);
        return fail("sketch", st, err);
      }
      if (acc == nullptr) {
        acc = next;
        continue;
      }
      const std::size_t k =
          args.k > 0 ? args.k : std::min(bks_sketch_k(acc), bks_sketch_k(next));
      bks_sketch* merged = nullptr;
      const auto st = bks_sketch_merge(acc, next, k, &merged, err, sizeof err);
      bks_sketch_free(acc);
      bks_sketch_free(next);
      if (st) return fail("sketch", st, err);
      acc = merged;
    }
    sketch = acc;
  } else {
    if (args.input.empty()) {
      std::fprintf(stderr, "bk sketch: --input or --merge is required\n");
      return 2;
    }
    if (args.k == 0) {
      std::fprintf(stderr, "bk sketch: --k is required\n");
      return 2;
    }
    bks_items* items = nullptr;
    if (auto st =
            bks_items_load_csv(args.input.c_str(), &items, err, sizeof err)) {
      return fail("sketch", st, err);
    }
    const auto st =
        bks_sketch_build(items, args.k, args.family.c_str(), args.seed,
                         args.stream ? 1 : 0, &sketch, err, sizeof err);
    bks_items_free(items);
    if (st) return fail("sketch", st, err);
  }
  double threshold = 0;
  char threshold_text[64];
  if (bks_sketch_threshold_rank(sketch, &threshold)) {
    std::snprintf(threshold_text, sizeof threshold_text, "%.17g", threshold);
  } else {
    std::snprintf(threshold_text, sizeof threshold_text, "none");
  }
  char summary[512];
  std::snprintf(summary, sizeof summary,
                "sketch family=%s k=%zu entries=%zu retained_weight=%.17g "
                "threshold_rank=%s",
                bks_sketch_family(sketch), bks_sketch_k(sketch),
                bks_sketch_entry_count(sketch),
                bks_sketch_retained_weight(sketch), threshold_text);
  int code = 0;
  if (!args.output.empty()) {
    if (auto st =
            bks_sketch_save(sketch, args.output.c_str(), err, sizeof err)) {
      code = fail("sketch", st, err);
    } else {
      std::printf("%s file=%s\n", summary, args.output.c_str());
    }
  } else {
    // No output path: the document goes to stdout, the summary to stderr.
    char* json = nullptr;
    if (auto st = bks_sketch_to_json(sketch, &json, err, sizeof err)) {
      code = fail("sketch", st, err);
    } else {
      std::fprintf(stderr, "%s\n", summary);
      std::printf("%s\n", json);
      bks_string_free(json);
    }
  }
  bks_sketch_free(sketch);
  return code;
}

struct EstimateArgs {
  std::string sketch_path;
  std::string method;
  std::string predicate;
  double total = 0;
  int permnum = 0;
  int inperm = 0;
  int redraws = 0;
  std::uint64_t seed = kDefaultSeed;
};

int run_estimate(const EstimateArgs& args) {
  char err[512] = {};
  bks_sketch* sketch = nullptr;
  if (auto st =
          bks_sketch_load(args.sketch_path.c_str(), &sketch, err, sizeof err)) {
    return fail("estimate", st, err);
  }
  double stored_total = 0;
  const bool has_stored = bks_sketch_total_weight(sketch, &stored_total) != 0;
  bks_estimate_opts opts = {};
  opts.method = args.method.c_str();
  opts.predicate = args.predicate.empty() ? nullptr : args.predicate.c_str();
  opts.total_weight = args.total;
  opts.permnum = args.permnum;
  opts.inperm = args.inperm;
  opts.redraws = args.redraws;
  opts.seed = args.seed;
  double value = 0;
  const auto st = bks_estimate(sketch, &opts, &value, err, sizeof err);
  bks_sketch_free(sketch);
  if (st) return fail("estimate", st, err);
  char total_text[64];
  if (args.total > 0) {
    std::snprintf(total_text, sizeof total_text, "%.17g", args.total);
  } else if (has_stored) {
    std::snprintf(total_text, sizeof total_text, "%.17g", stored_total);
  } else {
    std::snprintf(total_text, sizeof total_text, "none");
  }
  std::printf("estimate method=%s predicate=%s total=%s value=%.17g\n",
              args.method.c_str(),
              args.predicate.empty() ? "*" : args.predicate.c_str(),
              total_text, value);
  return 0;
}

struct BoundsArgs {
  std::string sketch_path;
  std::string method;
  std::string predicate;
  double total = 0;
  double delta = 0.05;
  int draws = 200;
  std::uint64_t seed = kDefaultSeed;
};

int run_bounds(const BoundsArgs& args) {
  char err[512] = {};
  bks_sketch* sketch = nullptr;
  if (auto st =
          bks_sketch_load(args.sketch_path.c_str(), &sketch, err, sizeof err)) {
    return fail("bounds", st, err);
  }
  bks_bounds_opts opts = {};
  opts.method = args.method.c_str();
  opts.predicate = args.predicate.empty() ? nullptr : args.predicate.c_str();
  opts.total_weight = args.total;
  opts.delta = args.delta;
  opts.draws = args.draws;
  opts.seed = args.seed;
  double lower = 0;
  double upper = 0;
  const auto st = bks_bounds(sketch, &opts, &lower, &upper, err, sizeof err);
  bks_sketch_free(sketch);
  if (st) return fail("bounds", st, err);
  std::printf("bounds method=%s predicate=%s delta=%g lower=%.17g "
              "upper=%.17g\n",
              args.method.c_str(),
              args.predicate.empty() ? "*" : args.predicate.c_str(),
              args.delta, lower, upper);
  return 0;
}

struct SimulateArgs {
  std::string config_path;
  std::string mode = "estimators";
  std::string output;
};

int run_simulate(const SimulateArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) {
    std::fprintf(stderr, "bk simulate: cannot open %s\n",
                 args.config_path.c_str());
    return 2;
  }
  std::ostringstream text;
  text << in.rdbuf();
  char err[512] = {};
  char* csv = nullptr;
  const auto st = bks_simulate(text.str().c_str(), args.mode.c_str(), &csv,
                               err, sizeof err);
  if (st) return fail("simulate", st, err);
  int code = 0;
  if (args.output.empty()) {
    std::fputs(csv, stdout);
  } else {
    std::ofstream out(args.output);
    if (!out) {
      std::fprintf(stderr, "bk simulate: cannot write %s\n",
                   args.output.c_str());
      code = 2;
    } else {
      out << csv;
    }
  }
  bks_string_free(csv);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bottom-k and k-mins sketches: build, estimate, bound, simulate"};
  app.set_version_flag("--version", std::string(bks_version()));
  app.require_subcommand(1);

  SketchArgs sketch_args;
  auto* sketch_cmd = app.add_subcommand(
      "sketch", "Summarize a weighted CSV, or merge sketch documents");
  sketch_cmd->add_option("-i,--input", sketch_args.input,
                         "CSV with header id,weight[,attr:<name>...]");
  sketch_cmd->add_option("--merge", sketch_args.merge,
                         "Sketch documents over one shared rank assignment");
  sketch_cmd->add_option("-k,--k", sketch_args.k, "Sketch size");
  sketch_cmd
      ->add_option("-f,--family", sketch_args.family,
                   "Rank family: ws | pri | uniform | wsr")
      ->capture_default_str();
  sketch_cmd->add_option("--seed", sketch_args.seed, "RNG seed")
      ->capture_default_str();
  sketch_cmd->add_flag("--stream", sketch_args.stream,
                       "Use the single-pass builder");
  sketch_cmd->add_option("-o,--output", sketch_args.output,
                         "Document path (default: document to stdout)");

  EstimateArgs estimate_args;
  auto* estimate_cmd =
      app.add_subcommand("estimate", "Estimate subpopulation or total weight");
  estimate_cmd->add_option("-s,--sketch", estimate_args.sketch_path,
                           "Sketch document")
      ->required();
  estimate_cmd
      ->add_option("-m,--method", estimate_args.method,
                   "ws-rc | pri-rc | ws-sc | ws-sc-markov | ws-prefix | ml | "
                   "wsr | wsr-ml | wsr-ratio")
      ->required();
  estimate_cmd->add_option("-p,--subpop", estimate_args.predicate,
                           "Clauses: name OP value [&& ...], OP in = != < <= > >=");
  estimate_cmd->add_option("--total", estimate_args.total,
                           "Known total weight of the full record set");
  estimate_cmd->add_option("--permnum", estimate_args.permnum,
                           "Markov permutation steps (default 20)");
  estimate_cmd->add_option("--inperm", estimate_args.inperm,
                           "Markov draws per permutation (default 20)");
  estimate_cmd->add_option("--redraws", estimate_args.redraws,
                           "Rank-redraw averaging rounds for ml");
  estimate_cmd->add_option("--seed", estimate_args.seed, "RNG seed")
      ->capture_default_str();

  BoundsArgs bounds_args;
  auto* bounds_cmd =
      app.add_subcommand("bounds", "Confidence bounds on a weight");
  bounds_cmd->add_option("-s,--sketch", bounds_args.sketch_path,
                         "Sketch document")
      ->required();
  bounds_cmd
      ->add_option("-m,--method", bounds_args.method,
                   "ws-normal | ws-quantile | ws-density | ws-lex | pri | wsr")
      ->required();
  bounds_cmd->add_option("-p,--subpop", bounds_args.predicate,
                         "Clauses: name OP value [&& ...], OP in = != < <= > >=");
  bounds_cmd->add_option("--total", bounds_args.total,
                         "Known total weight of the full record set");
  bounds_cmd->add_option("--delta", bounds_args.delta, "Per-side error")
      ->capture_default_str();
  bounds_cmd->add_option("--draws", bounds_args.draws, "Monte Carlo draws")
      ->capture_default_str();
  bounds_cmd->add_option("--seed", bounds_args.seed, "RNG seed")
      ->capture_default_str();

  SimulateArgs simulate_args;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "Run an experiment suite, emit CSV");
  simulate_cmd->add_option("-c,--config", simulate_args.config_path,
                           "key=value config file")
      ->required();
  simulate_cmd
      ->add_option("--mode", simulate_args.mode, "estimators | bounds")
      ->capture_default_str();
  simulate_cmd->add_option("-o,--output", simulate_args.output,
                           "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (sketch_cmd->parsed()) return run_sketch(sketch_args);
  if (estimate_cmd->parsed()) return run_estimate(estimate_args);
  if (bounds_cmd->parsed()) return run_bounds(bounds_args);
  return run_simulate(simulate_args);
}
