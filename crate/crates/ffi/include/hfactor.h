#ifndef HFACTOR_H
#define HFACTOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

enum HfStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_ARGUMENT = 2,
  HF_STATUS_PARSE = 3,
  /**
   * No partial factor or cover meets the allowance under the cap.
   */
  HF_STATUS_INFEASIBLE = 4,
  /**
   * Node budget exhausted; the best solution found, if any, is returned.
   */
  HF_STATUS_TIMEOUT = 5,
  HF_STATUS_LIMIT_EXCEEDED = 6,
  HF_STATUS_IO = 7,
  /**
   * A solution failed validation.
   */
  HF_STATUS_INVALID = 8,
  HF_STATUS_PANIC = 9,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum HfStatus HfStatus;
#else
typedef int32_t HfStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

enum HfFamily
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  HF_FAMILY_EXPONENTIAL = 0,
  HF_FAMILY_UNIFORM = 1,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum HfFamily HfFamily;
#else
typedef int32_t HfFamily;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

enum HfMode
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  HF_MODE_FACTOR = 0,
  HF_MODE_COVER = 1,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum HfMode HfMode;
#else
typedef int32_t HfMode;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

typedef struct HfGraph HfGraph;

typedef struct HfInstance HfInstance;

typedef struct HfSolution HfSolution;

/**
 * Densities are exact fractions `num / den`.
 */
typedef struct HfDensityReport {
  size_t vertex_count;
  size_t edge_count;
  int64_t d_h_num;
  int64_t d_h_den;
  int64_t d_star_num;
  int64_t d_star_den;
  int64_t delta_num;
  int64_t delta_den;
  bool strictly_balanced;
  bool balanced;
  /**
   * Saturates at `UINT64_MAX`.
   */
  uint64_t aut_count;
} HfDensityReport;

typedef struct HfDistribution {
  HfFamily family;
  /**
   * Rate of the exponential family; ignored for uniform.
   */
  double rate;
} HfDistribution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hf_version(void);

/**
 * Message of the last failure on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *hf_last_error_message(void);

/**
 * Builds a named pattern such as `complete:3` or `lollipop:5,2`; `+`
 * joins disjoint unions.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
HfStatus hf_graph_named(const char *spec, struct HfGraph **out);

/**
 * Parses an edge list (`u v` per line, optional `n <count>` header).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
HfStatus hf_graph_parse(const char *text, struct HfGraph **out);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t hf_graph_vertex_count(const struct HfGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t hf_graph_edge_count(const struct HfGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
HfStatus hf_graph_analyze(const struct HfGraph *graph, struct HfDensityReport *out);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void hf_graph_free(struct HfGraph *graph);

/**
 * Samples i.i.d. edge weights on K_n.
 *
 * # Safety
 * `out` must be writable.
 */
HfStatus hf_instance_sample(size_t n,
                            struct HfDistribution dist,
                            uint64_t seed,
                            struct HfInstance **out);

/**
 * Builds an instance from `n (n - 1) / 2` weights in upper-triangle
 * row-major order: (0,1), (0,2), ..., (1,2), ...
 *
 * # Safety
 * `weights` must point to `len` readable doubles; `out` must be writable.
 */
HfStatus hf_instance_from_weights(size_t n,
                                  const double *weights,
                                  size_t len,
                                  struct HfInstance **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
HfStatus hf_instance_load(const char *path, struct HfInstance **out);

/**
 * # Safety
 * `inst` must be a live handle; `path` a NUL-terminated string.
 */
HfStatus hf_instance_save(const struct HfInstance *inst, const char *path);

/**
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t hf_instance_n(const struct HfInstance *inst);

/**
 * # Safety
 * `inst` must be a live handle; `out` must be writable.
 */
HfStatus hf_instance_weight(const struct HfInstance *inst, size_t i, size_t j, double *out);

/**
 * # Safety
 * `inst` must be null or a handle not yet freed.
 */
void hf_instance_free(struct HfInstance *inst);

/**
 * Minimum-weight partial factor leaving at most `k` vertices uncovered,
 * using only edges of weight `<= cap` (pass `INFINITY` for no cap). A
 * `node_budget` of 0 uses the default. On `HF_STATUS_INFEASIBLE` `*out`
 * is null; on `HF_STATUS_TIMEOUT` it holds the best solution found, or
 * null.
 *
 * # Safety
 * `inst` and `graph` must be live handles; `out` must be writable.
 */
HfStatus hf_min_factor(const struct HfInstance *inst,
                       const struct HfGraph *graph,
                       size_t k,
                       double cap,
                       uint64_t node_budget,
                       struct HfSolution **out);

/**
 * As [`hf_min_factor`] for covers.
 *
 * # Safety
 * `inst` and `graph` must be live handles; `out` must be writable.
 */
HfStatus hf_min_cover(const struct HfInstance *inst,
                      const struct HfGraph *graph,
                      size_t k,
                      double cap,
                      uint64_t node_budget,
                      struct HfSolution **out);

/**
 * Exhaustive reference solver for small `n`.
 *
 * # Safety
 * `inst` and `graph` must be live handles; `out` must be writable.
 */
HfStatus hf_oracle(const struct HfInstance *inst,
                   const struct HfGraph *graph,
                   HfMode mode,
                   size_t k,
                   double cap,
                   struct HfSolution **out);

/**
 * Largest number of vertices a partial factor of weight `<= budget`
 * covers, with a witness.
 *
 * # Safety
 * `inst` and `graph` must be live handles; `covered` and `out` must be
 * writable.
 */
HfStatus hf_max_coverage(const struct HfInstance *inst,
                         const struct HfGraph *graph,
                         double budget,
                         uint64_t node_budget,
                         size_t *covered,
                         struct HfSolution **out);

/**
 * Total weight, or NaN for a null handle.
 *
 * # Safety
 * `sol` must be null or a live handle.
 */
double hf_solution_total_weight(const struct HfSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t hf_solution_copy_count(const struct HfSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t hf_solution_uncovered(const struct HfSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
bool hf_solution_is_optimal(const struct HfSolution *sol);

/**
 * Copies the embedding of copy `index` (host vertex of each pattern
 * vertex) into `buf`. `*written` receives the embedding length, also when
 * `buf` is too short, in which case nothing is copied.
 *
 * # Safety
 * `sol` must be a live handle; `buf` must hold `len` writable entries;
 * `written` must be writable.
 */
HfStatus hf_solution_copy(const struct HfSolution *sol,
                          size_t index,
                          size_t *buf,
                          size_t len,
                          size_t *written);

/**
 * The solution as a JSON record with 17 significant digits. Release the
 * string with [`hf_string_free`].
 *
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
HfStatus hf_solution_to_json(const struct HfSolution *sol, char **out);

/**
 * Re-checks every solution invariant against `inst` and `graph`;
 * `HF_STATUS_INVALID` with a message on failure.
 *
 * # Safety
 * All handles must be live.
 */
HfStatus hf_solution_validate(const struct HfSolution *sol,
                              const struct HfInstance *inst,
                              const struct HfGraph *graph);

/**
 * # Safety
 * `sol` must be null or a handle not yet freed.
 */
void hf_solution_free(struct HfSolution *sol);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void hf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HFACTOR_H */
