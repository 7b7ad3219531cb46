#ifndef WEAKCONC_H
#define WEAKCONC_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WcStatus {
  WC_STATUS_OK = 0,
  WC_STATUS_NULL_POINTER = 1,
  // Malformed input: parse errors, bad parameters, unknown vertices.
  WC_STATUS_INVALID_INPUT = 2,
  // Exact computation exceeds a size limit.
  WC_STATUS_CAPACITY = 3,
  // The chain is ill-posed (unreachable target, non-increasing move).
  WC_STATUS_NUMERIC = 4,
  WC_STATUS_BUFFER_TOO_SMALL = 5,
  WC_STATUS_INTERNAL = 6,
  WC_STATUS_PANIC = 7,
} WcStatus;

// Opaque weighted graph.
typedef struct WcGraph WcGraph;

// Opaque exact hitting-time solution.
typedef struct WcSolution WcSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on this thread.
const char *wc_last_error_message(void);

// Parses a `u v weight` edge list (NUL-terminated UTF-8).
//
// # Safety
// `text` must be a valid C string and `out` a valid pointer.
enum WcStatus wc_graph_parse(const char *text, struct WcGraph **out);

// Unit-rate path on `n` vertices.
//
// # Safety
// `out` must be a valid pointer.
enum WcStatus wc_graph_path(uintptr_t n, struct WcGraph **out);

// Unit-rate complete graph on `n` vertices.
//
// # Safety
// `out` must be a valid pointer.
enum WcStatus wc_graph_complete(uintptr_t n, struct WcGraph **out);

// Unit-rate `rows x cols` grid.
//
// # Safety
// `out` must be a valid pointer.
enum WcStatus wc_graph_grid(uintptr_t rows, uintptr_t cols, struct WcGraph **out);

// Two unit-rate cliques joined by one edge of rate `bridge_rate`.
//
// # Safety
// `out` must be a valid pointer.
enum WcStatus wc_graph_bridge(uintptr_t c1, uintptr_t c2, double bridge_rate, struct WcGraph **out);

// # Safety
// `g` must come from a `wc_graph_*` constructor and not be freed twice.
void wc_graph_free(struct WcGraph *g);

// # Safety
// `g` must be a live graph handle or null.
uintptr_t wc_graph_vertex_count(const struct WcGraph *g);

// # Safety
// `g` must be a live graph handle or null.
uintptr_t wc_graph_edge_count(const struct WcGraph *g);

// Index of the vertex with the given label.
//
// # Safety
// `g` must be a live handle, `label` a C string, `out` a valid pointer.
enum WcStatus wc_graph_vertex_id(const struct WcGraph *g, const char *label, uintptr_t *out);

// Global minimum cut weight `w_*`.
//
// # Safety
// `g` must be a live handle, `out` a valid pointer.
enum WcStatus wc_graph_min_cut(const struct WcGraph *g, double *out);

// Exact law of the passage time from `source` to `target` (n <= 20).
//
// # Safety
// `g` must be a live handle, `out` a valid pointer.
enum WcStatus wc_fpp_solve(const struct WcGraph *g,
                           uintptr_t source,
                           uintptr_t target,
                           struct WcSolution **out);

// # Safety
// `s` must come from `wc_fpp_solve` and not be freed twice.
void wc_solution_free(struct WcSolution *s);

// NaN for a null handle.
//
// # Safety
// `s` must be a live solution handle or null.
double wc_solution_expected_time(const struct WcSolution *s);

// # Safety
// `s` must be a live solution handle or null.
double wc_solution_variance(const struct WcSolution *s);

// Largest one-step drop of the mean remaining time.
//
// # Safety
// `s` must be a live solution handle or null.
double wc_solution_kappa(const struct WcSolution *s);

// # Safety
// `s` must be a live solution handle or null.
uintptr_t wc_solution_state_count(const struct WcSolution *s);

// `runs` shortest-path samples; writes X and the largest edge time on the
// minimizing path. Either buffer may be null; non-null buffers need `runs`
// slots. Output depends only on `seed`, not on the thread count.
//
// # Safety
// `g` must be a live handle; buffers must hold `runs` doubles.
enum WcStatus wc_fpp_simulate(const struct WcGraph *g,
                              uintptr_t source,
                              uintptr_t target,
                              uintptr_t runs,
                              uint64_t seed,
                              double *x_out,
                              double *xi_out,
                              uintptr_t capacity);

// Natural log of the lower-bound constant at `delta` in (0, 1].
//
// # Safety
// `out` must be a valid pointer.
enum WcStatus wc_psi_minus_ln(double delta, double *out);

// `E (max(0, s - U_1 - .. - U_k))^2` for independent uniforms.
//
// # Safety
// `out` must be a valid pointer.
enum WcStatus wc_fk_eval(uint32_t k, double s, double *out);

// `a(k) = inf_q q / (1 - (1 - q^3)^k)`.
//
// # Safety
// `out` must be a valid pointer.
enum WcStatus wc_a_k(uint32_t k, double *out);

// Empirical `inf { d : P(|V| > d) <= d }` over `len` samples.
//
// # Safety
// `samples` must point to `len` doubles; `out` must be valid.
enum WcStatus wc_l0_norm(const double *samples, uintptr_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEAKCONC_H */
