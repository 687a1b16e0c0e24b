#ifndef LASDG_H
#define LASDG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LasdgStatus {
  LASDG_STATUS_OK = 0,
  LASDG_STATUS_NULL_POINTER = 1,
  LASDG_STATUS_INVALID_ARGUMENT = 2,
  LASDG_STATUS_PARSE = 3,
  LASDG_STATUS_NUMERICAL = 4,
  LASDG_STATUS_IO = 5,
  LASDG_STATUS_BUFFER_TOO_SMALL = 6,
  LASDG_STATUS_INTERNAL = 7,
} LasdgStatus;

/**
 * A network with per-edge capacities.
 */
typedef struct LasdgGraph LasdgGraph;

/**
 * One controller advancing on one realization's state stream.
 */
typedef struct LasdgSimulation LasdgSimulation;

/**
 * Metrics of one simulated slot.
 */
typedef struct LasdgSlotRecord {
  uint64_t t;
  double inst_cost;
  double avg_cost;
  double total_queue;
} LasdgSlotRecord;

/**
 * Scalar part of an oracle solve.
 */
typedef struct LasdgOracleSummary {
  double dual_value;
  double primal_cost;
  double kkt_residual;
  double complementary_slackness;
  double primal_violation;
  double dual_smoothness;
  uint64_t iterations;
  uint64_t sample_count;
} LasdgOracleSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL if none.
 */
const char *lasdg_last_error_message(void);

/**
 * Static NUL-terminated crate version.
 */
const char *lasdg_version(void);

/**
 * Parses the `nodes N` / `src dst|virtual capacity` text format.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum LasdgStatus lasdg_graph_parse(const char *text, struct LasdgGraph **out);

/**
 * # Safety
 * `graph` must be NULL or a handle from [`lasdg_graph_parse`] not yet freed.
 */
void lasdg_graph_free(struct LasdgGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `nodes` and `edges` writable.
 */
enum LasdgStatus lasdg_graph_dimensions(const struct LasdgGraph *graph,
                                        size_t *nodes,
                                        size_t *edges);

/**
 * `ρ(AᵀA)` of the incidence matrix.
 *
 * # Safety
 * `graph` must be a live handle; `out` writable.
 */
enum LasdgStatus lasdg_graph_spectral_radius(const struct LasdgGraph *graph, double *out);

/**
 * Copies the edge capacities into `buf`, which must hold the edge count.
 *
 * # Safety
 * `graph` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum LasdgStatus lasdg_graph_capacities(const struct LasdgGraph *graph, double *buf, size_t len);

/**
 * Builds the configured scenario and controller from `key = value`
 * config text. Realization `r` uses state seed `seed + r`, matching the
 * Monte Carlo harness.
 *
 * # Safety
 * `config` must be NUL-terminated; `out` writable.
 */
enum LasdgStatus lasdg_simulation_new(const char *config,
                                      uint64_t realization,
                                      struct LasdgSimulation **out);

/**
 * # Safety
 * `sim` must be NULL or a handle from [`lasdg_simulation_new`] not yet freed.
 */
void lasdg_simulation_free(struct LasdgSimulation *sim);

/**
 * Advances one slot and writes its metrics to `record`.
 *
 * # Safety
 * `sim` must be a live handle; `record` writable.
 */
enum LasdgStatus lasdg_simulation_step(struct LasdgSimulation *sim, struct LasdgSlotRecord *record);

/**
 * # Safety
 * `sim` must be a live handle; `out` writable.
 */
enum LasdgStatus lasdg_simulation_node_count(const struct LasdgSimulation *sim, size_t *out);

/**
 * Physical queue per node after the last slot.
 *
 * # Safety
 * `sim` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum LasdgStatus lasdg_simulation_queues(const struct LasdgSimulation *sim,
                                         double *buf,
                                         size_t len);

/**
 * The controller's multipliers (`λ̂` for LA-SDG).
 *
 * # Safety
 * `sim` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum LasdgStatus lasdg_simulation_multipliers(const struct LasdgSimulation *sim,
                                              double *buf,
                                              size_t len);

/**
 * Solves the sample-average dual of the configured scenario with the
 * config's `oracle_samples`, `oracle_seed` and `oracle_tol`, writing `λ*`
 * into `lambda` (node count entries).
 *
 * # Safety
 * `config` must be NUL-terminated; `summary` writable; `lambda` must point
 * to `len` writable doubles.
 */
enum LasdgStatus lasdg_oracle_solve(const char *config,
                                    struct LasdgOracleSummary *summary,
                                    double *lambda,
                                    size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LASDG_H */
