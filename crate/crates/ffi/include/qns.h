#ifndef QNS_H
#define QNS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define QNS_OK 0

#define QNS_ERR_INVALID_INPUT 1

#define QNS_ERR_DIMENSION 2

#define QNS_ERR_NULL_POINTER 3

#define QNS_ERR_NO_CONVERGENCE 4

#define QNS_ERR_UNDEFINED_COMPOSITION 5

#define QNS_ERR_PANIC 6

/*
 A QNS, CQNS or NS correlation.
 */
typedef struct QnsCorrelation QnsCorrelation;

/*
 A non-local game given by constraints.
 */
typedef struct QnsGame QnsGame;

/*
 A simple undirected graph.
 */
typedef struct QnsGraph QnsGraph;

/*
 Outcome of a check: `pass` is 1 or 0, `residual` the largest residual.
 */
typedef struct QnsCheck {
  int32_t pass;
  double residual;
} QnsCheck;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. Valid until the
 next call into the library from the same thread.
 */
const char *qns_last_error(void);

/*
 Releases a string returned by the library.

 # Safety
 `s` must be null or a pointer obtained from this library.
 */
void qns_string_free(char *s);

/*
 Parses a correlation from JSON.

 # Safety
 `json` must be a nul-terminated string; `out` a valid pointer.
 */
int32_t qns_correlation_from_json(const char *json, struct QnsCorrelation **out);

/*
 Serialises a correlation to JSON; release the result with
 `qns_string_free`.

 # Safety
 `c` must be a live handle; `out` a valid pointer.
 */
int32_t qns_correlation_to_json(const struct QnsCorrelation *c, char **out);

/*
 Releases a correlation handle.

 # Safety
 `c` must be null or a handle from this library, not freed before.
 */
void qns_correlation_free(struct QnsCorrelation *c);

/*
 Writes the input and output sizes `[x, y, a, b]` to `dims`.

 # Safety
 `c` must be a live handle; `dims` must point to 4 writable values.
 */
int32_t qns_correlation_dims(const struct QnsCorrelation *c, uintptr_t *dims);

/*
 Checks the defining conditions of the correlation's class.

 # Safety
 `c` must be a live handle; `out` a valid pointer.
 */
int32_t qns_correlation_verify(const struct QnsCorrelation *c, double tol, struct QnsCheck *out);

/*
 Checks that the correlation maps fair states to fair states.

 # Safety
 `c` must be a live handle; `out` a valid pointer.
 */
int32_t qns_correlation_is_fair(const struct QnsCorrelation *c, double tol, struct QnsCheck *out);

/*
 Quantum colouring of `K_{d^2}` with `d` colours, as a CQNS correlation.

 # Safety
 `out` must be a valid pointer.
 */
int32_t qns_kd2_colouring(uintptr_t d, struct QnsCorrelation **out);

/*
 Graph on `n` vertices from `edge_count` pairs stored flat in `edges`.

 # Safety
 `edges` must point to `2 * edge_count` values (may be null when
 `edge_count` is 0); `out` a valid pointer.
 */
int32_t qns_graph_new(uintptr_t n,
                      const uintptr_t *edges,
                      uintptr_t edge_count,
                      struct QnsGraph **out);

/*
 Parses a graph from `{"n": .., "edges": [[i, j], ..]}`.

 # Safety
 `json` must be a nul-terminated string; `out` a valid pointer.
 */
int32_t qns_graph_from_json(const char *json, struct QnsGraph **out);

/*
 Releases a graph handle.

 # Safety
 `g` must be null or a handle from this library, not freed before.
 */
void qns_graph_free(struct QnsGraph *g);

/*
 Lovász theta number of `g`, solved to absolute tolerance `tol`.

 # Safety
 `g` must be a live handle; `out` a valid pointer.
 */
int32_t qns_lovasz_theta(const struct QnsGraph *g, double tol, double *out);

/*
 Checks whether a correlation is a proper colouring of `g`.

 # Safety
 `c`, `g` must be live handles; `out` a valid pointer.
 */
int32_t qns_proper_check(const struct QnsCorrelation *c,
                         const struct QnsGraph *g,
                         double tol,
                         struct QnsCheck *out);

/*
 Parses a game from JSON.

 # Safety
 `json` must be a nul-terminated string; `out` a valid pointer.
 */
int32_t qns_game_from_json(const char *json, struct QnsGame **out);

/*
 Colouring game of `g` with `colours` colours.

 # Safety
 `g` must be a live handle; `out` a valid pointer.
 */
int32_t qns_colouring_game(const struct QnsGraph *g,
                           uintptr_t colours,
                           int32_t synchronous,
                           struct QnsGame **out);

/*
 Releases a game handle.

 # Safety
 `g` must be null or a handle from this library, not freed before.
 */
void qns_game_free(struct QnsGame *g);

/*
 Checks whether `c` is a perfect strategy for `game`.

 # Safety
 `game`, `c` must be live handles; `out` a valid pointer.
 */
int32_t qns_game_check(const struct QnsGame *game,
                       const struct QnsCorrelation *c,
                       double tol,
                       struct QnsCheck *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QNS_H */
