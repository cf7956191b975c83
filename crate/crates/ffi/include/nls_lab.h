#ifndef NLS_LAB_H
#define NLS_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum NlsStatus {
  NLS_STATUS_OK = 0,
  NLS_STATUS_NULL_POINTER = 1,
  NLS_STATUS_INVALID_ARGUMENT = 2,
  NLS_STATUS_BUDGET_EXCEEDED = 3,
  NLS_STATUS_INTEGRATOR_FAILURE = 4,
  NLS_STATUS_PANIC = 5,
  NLS_STATUS_INTERNAL = 6,
} NlsStatus;

// `M`, `T` or `N` functional.
typedef enum NlsFunctional {
  NLS_FUNCTIONAL_M = 0,
  NLS_FUNCTIONAL_T = 1,
  NLS_FUNCTIONAL_N = 2,
} NlsFunctional;

// Opaque truncated Fourier field.
typedef struct NlsField NlsField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *nls_version(void);

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`) and returns its full length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
uintptr_t nls_last_error_message(char *buf, uintptr_t len);

// Field on `|k| ≤ k_max` from `2·k_max + 1` coefficients ordered
// `k = −k_max, …, k_max`.
//
// # Safety
// `re` and `im` must be valid for `len` reads, `out` for one write.
enum NlsStatus nls_field_new(uintptr_t k_max,
                             const double *re,
                             const double *im,
                             uintptr_t len,
                             struct NlsField **out);

// Sample `index` of the Gaussian ensemble at regularity `s`, with
// `σ = s − ½ − delta`, modes `|k| ≤ k_cut` and the given seed.
//
// # Safety
// `out` must be valid for one write.
enum NlsStatus nls_field_sample(double s,
                                double delta,
                                uintptr_t k_cut,
                                uint64_t seed,
                                uintptr_t index,
                                struct NlsField **out);

// Releases a field; null is ignored.
//
// # Safety
// `f` must come from this library and not be used afterwards.
void nls_field_free(struct NlsField *f);

// # Safety
// `f` must be a live handle, `out` valid for one write.
enum NlsStatus nls_field_k_max(const struct NlsField *f, uintptr_t *out);

// Copies the `2·k_max + 1` coefficients out.
//
// # Safety
// `f` must be a live handle, `re` and `im` valid for `len` writes.
enum NlsStatus nls_field_coeffs(const struct NlsField *f, double *re, double *im, uintptr_t len);

// `M(u) = ∫|u|²`.
//
// # Safety
// `f` must be a live handle, `out` valid for one write.
enum NlsStatus nls_field_mass(const struct NlsField *f, double *out);

// `H(u) = ½∫|∂ₓu|² + ⅙∫|u|⁶`.
//
// # Safety
// `f` must be a live handle, `out` valid for one write.
enum NlsStatus nls_field_hamiltonian(const struct NlsField *f, double *out);

// `‖u‖_{H^σ}`.
//
// # Safety
// `f` must be a live handle, `out` valid for one write.
enum NlsStatus nls_field_sobolev_norm(const struct NlsField *f, double sigma, double *out);

// `Φ^N(t) u` with nominal step `dt`; the result is a new handle.
//
// # Safety
// `f` must be a live handle, `out` valid for one write.
enum NlsStatus nls_evolve(const struct NlsField *f,
                          uintptr_t n,
                          double dt,
                          double t,
                          struct NlsField **out);

// Value of the `M`, `T` or `N` functional at truncation `n`.
//
// # Safety
// `f` must be a live handle, `re` and `im` valid for one write each.
enum NlsStatus nls_functional(const struct NlsField *f,
                              enum NlsFunctional kind,
                              double s,
                              uintptr_t n,
                              double *re,
                              double *im);

// `E_{s,N}(u)`.
//
// # Safety
// `f` must be a live handle, `out` valid for one write.
enum NlsStatus nls_modified_energy(const struct NlsField *f, double s, uintptr_t n, double *out);

// `Q_{s,N}(u)`, the time derivative of `E_{s,N}` along the flow.
//
// # Safety
// `f` must be a live handle, `out` valid for one write.
enum NlsStatus nls_energy_derivative(const struct NlsField *f, double s, uintptr_t n, double *out);

// Resonance function of an alternating tuple of length 4 or 6.
//
// # Safety
// `ks` must be valid for `len` reads, `out` for one write.
enum NlsStatus nls_omega(const int64_t *ks, uintptr_t len, int64_t *out);

// Number of `(k1, k2, k3)` with `|k_j| ≤ bound`, `k1 − k2 + k3 = l` and
// `k1² − k2² + k3² = q`. With pairings excluded the divisor route is used.
//
// # Safety
// `out` must be valid for one write.
enum NlsStatus nls_count_triples(int64_t l,
                                 int64_t q,
                                 uint64_t bound,
                                 bool exclude_pairings,
                                 uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLS_LAB_H */
