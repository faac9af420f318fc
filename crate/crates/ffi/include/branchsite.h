/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef BRANCHSITE_H
#define BRANCHSITE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define BS_OK 0

/*
 Null pointer, bad UTF-8 or an out-of-range argument.
 */
#define BS_ERR_ARGUMENT 1

/*
 Invalid input data or configuration (CLI exit code 2).
 */
#define BS_ERR_VALIDATION 2

/*
 The exact solver refused the instance (CLI exit code 3).
 */
#define BS_ERR_SOLVER 3

/*
 File system failure (CLI exit code 4).
 */
#define BS_ERR_IO 4

/*
 A Rust panic was caught at the boundary.
 */
#define BS_ERR_PANIC 5

#define BS_METHOD_EXACT 0

#define BS_METHOD_GREEDY 1

#define BS_METHOD_GREEDY_SWAP 2

/*
 Opaque MCLP instance.
 */
typedef struct BsInstance BsInstance;

/*
 Opaque MCLP solution.
 */
typedef struct BsSolution BsSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread; do not free it.
 */
const char *bs_last_error(void);

/*
 Parses an instance from JSON text.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
int32_t bs_instance_from_json(const char *json, struct BsInstance **out);

/*
 # Safety
 `inst` must come from [`bs_instance_from_json`] and not be used afterwards. Null is ignored.
 */
void bs_instance_free(struct BsInstance *inst);

/*
 Number of demand areas and candidate sites.

 # Safety
 `inst` must be a live handle; `areas` and `sites` must be writable.
 */
int32_t bs_instance_counts(const struct BsInstance *inst, size_t *areas, size_t *sites);

/*
 Opens `p` sites with the given `BS_METHOD_*`. Set `allow_large` to run the
 exact solver above its default size cap.

 # Safety
 `inst` must be a live handle; `out` must be writable.
 */
int32_t bs_solve(const struct BsInstance *inst,
                 size_t p,
                 int32_t method,
                 bool allow_large,
                 struct BsSolution **out);

/*
 # Safety
 `sol` must come from [`bs_solve`] and not be used afterwards. Null is ignored.
 */
void bs_solution_free(struct BsSolution *sol);

/*
 Covered population and covering percentage.

 # Safety
 `sol` must be a live handle; `z` and `pct` must be writable.
 */
int32_t bs_solution_objective(const struct BsSolution *sol, uint64_t *z, double *pct);

/*
 Whole solution as JSON. Free the string with [`bs_string_free`].

 # Safety
 `sol` must be a live handle; `out` must be writable.
 */
int32_t bs_solution_to_json(const struct BsSolution *sol, char **out);

/*
 # Safety
 `s` must come from this library and not be used afterwards. Null is ignored.
 */
void bs_string_free(char *s);

/*
 Principal-eigenvector weights and consistency ratio of an `n` x `n`
 row-major comparison matrix. `weights` receives `n` values.

 # Safety
 `data` must hold `n * n` doubles; `weights` must hold `n`; `cr` must be writable.
 */
int32_t bs_matrix_weights(const double *data, size_t n, double *weights, double *cr);

/*
 Loads a project file and runs the whole pipeline into `out_dir`.

 # Safety
 Both arguments must be NUL-terminated strings.
 */
int32_t bs_run_pipeline(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRANCHSITE_H */
