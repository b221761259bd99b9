/* C interface to the bottom-k sketch library.  All functions are
 * synchronous and thread-compatible: distinct handles may be used from
 * distinct threads, a single handle must not be shared without locking. */
#ifndef BKSKETCH_H
#define BKSKETCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BKS_API __declspec(dllexport)
#else
#define BKS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the bundled CLI. */
typedef enum bks_status {
  BKS_OK = 0,
  BKS_ERR_INPUT = 2,      /* unreadable or malformed input */
  BKS_ERR_CAPABILITY = 3, /* method incompatible with the given sketch */
  BKS_ERR_CONFIG = 4,     /* invalid configuration or option value */
  BKS_ERR_INTERNAL = 5
} bks_status;

typedef struct bks_items bks_items;   /* a weighted record set */
typedef struct bks_sketch bks_sketch; /* a bottom-k or k-mins summary */

/* Library version string; storage is static, do not free. */
BKS_API const char* bks_version(void);

/* Frees strings returned through char** out parameters. */
BKS_API void bks_string_free(char* s);

/* ---- weighted record sets ----
 * CSV format: header `id,weight[,attr:<name>...]`, one record per row.
 * On failure the functions below write a message into errbuf (if nonnull)
 * and return a nonzero status; out handles are untouched. */
BKS_API bks_status bks_items_load_csv(const char* path, bks_items** out,
                                      char* errbuf, size_t errbuf_len);
BKS_API bks_status bks_items_parse_csv(const char* text,
                                       const char* source_name,
                                       bks_items** out, char* errbuf,
                                       size_t errbuf_len);
BKS_API void bks_items_free(bks_items* items);
BKS_API size_t bks_items_count(const bks_items* items);
BKS_API double bks_items_total_weight(const bks_items* items);

/* ---- sketch construction ----
 * family: "ws" (exponential ranks), "pri" (priority ranks), "uniform",
 * or "wsr" (k-mins sketch from k independent exponential assignments).
 * streaming != 0 uses the single-pass builder (same distribution, ranks
 * drawn per arrival instead of per item index). */
BKS_API bks_status bks_sketch_build(const bks_items* items, size_t k,
                                    const char* family, uint64_t seed,
                                    int streaming, bks_sketch** out,
                                    char* errbuf, size_t errbuf_len);
BKS_API bks_status bks_sketch_merge(const bks_sketch* a, const bks_sketch* b,
                                    size_t k, bks_sketch** out, char* errbuf,
                                    size_t errbuf_len);
BKS_API void bks_sketch_free(bks_sketch* sketch);

/* Versioned JSON document, lossless for ranks and weights. */
BKS_API bks_status bks_sketch_save(const bks_sketch* sketch, const char* path,
                                   char* errbuf, size_t errbuf_len);
BKS_API bks_status bks_sketch_load(const char* path, bks_sketch** out,
                                   char* errbuf, size_t errbuf_len);
BKS_API bks_status bks_sketch_to_json(const bks_sketch* sketch, char** out,
                                      char* errbuf, size_t errbuf_len);

/* ---- sketch accessors (never fail; null handle yields zeros) ---- */
BKS_API int bks_sketch_is_kmins(const bks_sketch* sketch);
BKS_API size_t bks_sketch_k(const bks_sketch* sketch);
BKS_API size_t bks_sketch_entry_count(const bks_sketch* sketch);
BKS_API const char* bks_sketch_family(const bks_sketch* sketch);
BKS_API double bks_sketch_retained_weight(const bks_sketch* sketch);
/* Returns 1 and writes the (k+1)-smallest rank when the sketch is a proper
 * summary; returns 0 when it holds the whole set (or is k-mins). */
BKS_API int bks_sketch_threshold_rank(const bks_sketch* sketch, double* out);
/* Returns 1 and writes the stored total weight when present. */
BKS_API int bks_sketch_total_weight(const bks_sketch* sketch, double* out);

/* ---- estimation ----
 * method:
 *   "ws-rc" "pri-rc"           rank-conditioning adjusted weights
 *   "ws-sc"                    subset conditioning, exact (k <= 20, needs W)
 *   "ws-sc-markov"             subset conditioning, Markov chain (needs W)
 *   "ws-prefix"                prefix conditioning (needs W)
 *   "ml"                       maximum likelihood (total, subpopulation,
 *                              or subpopulation with known W)
 *   "wsr"                      k-mins: unbiased total, or per-item
 *                              inclusion-probability subpopulation (needs W)
 *   "wsr-ml"                   k-mins: maximum-likelihood total
 *   "wsr-ratio"                k-mins: multiplicity ratio (needs W)
 * predicate: clauses joined with "&&", each "name OP value" with OP one of
 * = != < <= > >= (ordered comparisons need numeric values); empty, null,
 * "*", or "all" selects the whole set.  total_weight: the known weight of
 * the full record set; pass a value <= 0 when unknown. */
typedef struct bks_estimate_opts {
  const char* method;
  const char* predicate;
  double total_weight;
  int permnum;  /* Markov chains; <= 0 uses the default 20 */
  int inperm;   /* draws per chain; <= 0 uses the default 20 */
  int redraws;  /* ml rank-redraw averaging; 0 solves the observed ranks */
  uint64_t seed;
} bks_estimate_opts;

BKS_API bks_status bks_estimate(const bks_sketch* sketch,
                                const bks_estimate_opts* opts, double* out,
                                char* errbuf, size_t errbuf_len);

/* ---- confidence bounds ----
 * method:
 *   "ws-normal" "ws-quantile" "ws-density"   exponential-rank sketches;
 *       the whole set when predicate is empty, otherwise the subpopulation
 *       (density applies to the whole set only)
 *   "ws-lex"   subpopulation bounds exploiting a known total weight
 *   "pri"      priority-rank tail bounds (whole set or subpopulation)
 *   "wsr"      k-mins total-weight bounds
 * delta is the per-side error; the interval covers with confidence
 * 1 - 2*delta.  delta <= 0 uses the default 0.05; draws <= 0 uses the
 * default 200. */
typedef struct bks_bounds_opts {
  const char* method;
  const char* predicate;
  double total_weight;
  double delta;
  int draws;
  uint64_t seed;
} bks_bounds_opts;

BKS_API bks_status bks_bounds(const bks_sketch* sketch,
                              const bks_bounds_opts* opts, double* out_lower,
                              double* out_upper, char* errbuf,
                              size_t errbuf_len);

/* ---- simulation ----
 * config_text: key=value lines (dist, alpha, n, k, g, reps, estimators,
 * bounds, delta, permnum, inperm, draws, ws_method, seed; '#' comments).
 * mode: "estimators" or "bounds".  On success *out_csv receives the metrics
 * table; release it with bks_string_free. */
BKS_API bks_status bks_simulate(const char* config_text, const char* mode,
                                char** out_csv, char* errbuf,
                                size_t errbuf_len);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BKSKETCH_H */
