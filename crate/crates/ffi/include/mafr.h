#ifndef MAFR_H
#define MAFR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Rotation ordering codes.
 */
#define MAFR_SMOOTH_FIRST 0

#define MAFR_ROUGH_FIRST 1

/**
 * Result code of every entry point.
 */
typedef enum MafrStatus {
  MAFR_STATUS_OK = 0,
  MAFR_STATUS_NULL_POINTER = 1,
  MAFR_STATUS_INVALID_ARGUMENT = 2,
  MAFR_STATUS_PARSE = 3,
  MAFR_STATUS_NUMERICAL = 4,
  MAFR_STATUS_IO = 5,
  MAFR_STATUS_BUFFER_TOO_SMALL = 6,
  MAFR_STATUS_PANIC = 7,
} MafrStatus;

typedef struct MafrBasis MafrBasis;

typedef struct MafrDataset MafrDataset;

typedef struct MafrPca MafrPca;

typedef struct MafrRotation MafrRotation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message (NUL-terminated) into
 * `buf` and returns the buffer size needed, including the NUL. Returns 0
 * when there is no error. A short buffer receives a truncated message.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t mafr_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mafr_version(void);

/**
 * Fourier basis of `size` functions on `[lo, hi]`; period `hi − lo`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MafrStatus mafr_basis_fourier(double lo, double hi, size_t size, struct MafrBasis **out);

/**
 * B-spline basis of `num_basis` functions of `order` with uniform knots.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MafrStatus mafr_basis_bspline(double lo,
                                   double hi,
                                   size_t order,
                                   size_t num_basis,
                                   struct MafrBasis **out);

/**
 * # Safety
 * `basis` must be a live handle; `out` valid for writes.
 */
enum MafrStatus mafr_basis_size(const struct MafrBasis *basis, size_t *out);

/**
 * Derivative `derivative` of every basis function at `points`
 * (`num_points × size`, row-major).
 *
 * # Safety
 * `points` must hold `num_points` values; see the module docs for `out`.
 */
enum MafrStatus mafr_basis_evaluate(const struct MafrBasis *basis,
                                    const double *points,
                                    size_t num_points,
                                    size_t derivative,
                                    double *out,
                                    size_t capacity,
                                    size_t *needed);

/**
 * # Safety
 * `basis` must be null or a handle not yet freed.
 */
void mafr_basis_free(struct MafrBasis *basis);

/**
 * Simulated Fourier dataset on `[0, 1]`. `scale_is_variance` selects
 * whether `exp(−j·scale_decay)` is a variance (non-zero) or a standard
 * deviation (zero).
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MafrStatus mafr_simulate(size_t num_curves,
                              size_t num_basis,
                              double scale_decay,
                              int32_t scale_is_variance,
                              uint64_t seed,
                              struct MafrDataset **out);

/**
 * Dataset from a `num_curves × size` row-major coefficient matrix.
 *
 * # Safety
 * `coefficients` must hold `num_curves × size` values.
 */
enum MafrStatus mafr_dataset_from_coefficients(const struct MafrBasis *basis,
                                               const double *coefficients,
                                               size_t num_curves,
                                               struct MafrDataset **out);

/**
 * Smooths `num_curves × num_points` row-major `values` observed at
 * `points` onto `basis`. With `lambda > 0`, `penalty` (e.g. `"d2"`) is the
 * roughness operator; it may be null when `lambda == 0`.
 *
 * # Safety
 * Array arguments must hold the stated number of values; `penalty` must be
 * null or a NUL-terminated string.
 */
enum MafrStatus mafr_fit(const struct MafrBasis *basis,
                         const double *points,
                         size_t num_points,
                         const double *values,
                         size_t num_curves,
                         double lambda,
                         const char *penalty,
                         struct MafrDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; `out` valid for writes.
 */
enum MafrStatus mafr_dataset_num_curves(const struct MafrDataset *dataset, size_t *out);

/**
 * `num_curves × size` coefficients, row-major.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_dataset_coefficients(const struct MafrDataset *dataset,
                                          double *out,
                                          size_t capacity,
                                          size_t *needed);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void mafr_dataset_free(struct MafrDataset *dataset);

/**
 * Functional PCA. A non-zero `retain_count` keeps that many components;
 * otherwise the smallest count reaching `retain_fraction` of the variance
 * is kept.
 *
 * # Safety
 * `dataset` must be a live handle; `out` valid for writes.
 */
enum MafrStatus mafr_fpca(const struct MafrDataset *dataset,
                          size_t retain_count,
                          double retain_fraction,
                          int32_t center,
                          struct MafrPca **out);

/**
 * # Safety
 * `pca` must be a live handle; `out` valid for writes.
 */
enum MafrStatus mafr_pca_num_components(const struct MafrPca *pca, size_t *out);

/**
 * `num_components × size` component coefficients, row-major.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_pca_components(const struct MafrPca *pca,
                                    double *out,
                                    size_t capacity,
                                    size_t *needed);

/**
 * `num_curves × num_components` scores, row-major.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_pca_scores(const struct MafrPca *pca,
                                double *out,
                                size_t capacity,
                                size_t *needed);

/**
 * Retained component variances, descending.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_pca_variances(const struct MafrPca *pca,
                                   double *out,
                                   size_t capacity,
                                   size_t *needed);

/**
 * # Safety
 * `pca` must be null or a handle not yet freed.
 */
void mafr_pca_free(struct MafrPca *pca);

/**
 * Rotation minimizing the roughness measured by `penalty`
 * (`d1`, `d2`, `harmonic:<period>`, `custom:<json list>`).
 *
 * # Safety
 * `pca` must be a live handle; `penalty` a NUL-terminated string; `out`
 * valid for writes.
 */
enum MafrStatus mafr_rotate(const struct MafrPca *pca,
                            const char *penalty,
                            uint32_t ordering_code,
                            struct MafrRotation **out);

/**
 * Joint rotation with one positive weight per retained component.
 *
 * # Safety
 * As [`mafr_rotate`]; `weights` must hold `num_weights` values.
 */
enum MafrStatus mafr_joint_rotate(const struct MafrPca *pca,
                                  const char *penalty,
                                  const double *weights,
                                  size_t num_weights,
                                  uint32_t ordering_code,
                                  struct MafrRotation **out);

/**
 * # Safety
 * `rotation` must be a live handle; `out` valid for writes.
 */
enum MafrStatus mafr_rotation_num_components(const struct MafrRotation *rotation, size_t *out);

/**
 * Orthogonal `num_components × num_components` matrix `U`, row-major.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_rotation_matrix(const struct MafrRotation *rotation,
                                     double *out,
                                     size_t capacity,
                                     size_t *needed);

/**
 * `num_components × size` rotated component coefficients, row-major.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_rotation_components(const struct MafrRotation *rotation,
                                         double *out,
                                         size_t capacity,
                                         size_t *needed);

/**
 * `num_curves × num_components` rotated scores, row-major.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_rotation_scores(const struct MafrRotation *rotation,
                                     double *out,
                                     size_t capacity,
                                     size_t *needed);

/**
 * Penalty eigenvalues in rotation order.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_rotation_penalty_eigenvalues(const struct MafrRotation *rotation,
                                                  double *out,
                                                  size_t capacity,
                                                  size_t *needed);

/**
 * Variances of the rotated scores.
 *
 * # Safety
 * See the module docs.
 */
enum MafrStatus mafr_rotation_variances(const struct MafrRotation *rotation,
                                        double *out,
                                        size_t capacity,
                                        size_t *needed);

/**
 * # Safety
 * `rotation` must be null or a handle not yet freed.
 */
void mafr_rotation_free(struct MafrRotation *rotation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAFR_H */
