#ifndef SQFREE_H
#define SQFREE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SqfStatus {
  SQF_STATUS_OK = 0,
  SQF_STATUS_NULL_POINTER = 1,
  SQF_STATUS_DOMAIN = 2,
  SQF_STATUS_CAPACITY = 3,
  SQF_STATUS_IO = 4,
  SQF_STATUS_FORMAT = 5,
  SQF_STATUS_INVALID_UTF8 = 6,
  SQF_STATUS_PANIC = 7,
} SqfStatus;

/**
 * Möbius table handle.
 */
typedef struct SqfMobiusTable SqfMobiusTable;

/**
 * Residue-class profile handle.
 */
typedef struct SqfProfile SqfProfile;

typedef struct SqfVariance {
  uint64_t x;
  uint64_t q;
  uint64_t phi;
  uint64_t total;
  double c_q;
  double v;
  double centered_variance;
  uint64_t t;
} SqfVariance;

typedef struct SqfGamma {
  uint64_t t;
  uint64_t t_gamma;
  double v;
  double v_gamma;
  double defect;
} SqfGamma;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sqf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sqf_version(void);

void sqf_string_free(char *s);

enum SqfStatus sqf_euler_phi(uint64_t q, uint64_t *phi);

enum SqfStatus sqf_c_constant(uint64_t q, double *c_q);

/**
 * Sieves μ on `[1, limit]`.
 */
enum SqfStatus sqf_table_new(uint64_t limit, struct SqfMobiusTable **table);

enum SqfStatus sqf_table_load(const char *path, struct SqfMobiusTable **table);

enum SqfStatus sqf_table_save(const struct SqfMobiusTable *table, const char *path);

void sqf_table_free(struct SqfMobiusTable *table);

/**
 * Largest `n` covered by the table, or 0 for a null handle.
 */
uint64_t sqf_table_limit(const struct SqfMobiusTable *table);

enum SqfStatus sqf_table_mu(const struct SqfMobiusTable *table, uint64_t n, int8_t *mu);

enum SqfStatus sqf_squarefree_count(const struct SqfMobiusTable *table,
                                    uint64_t x,
                                    uint64_t *count);

/**
 * Counts `S(x;q,a)` for every unit `a` mod `q`.
 */
enum SqfStatus sqf_profile_new(const struct SqfMobiusTable *table,
                               uint64_t x,
                               uint64_t q,
                               struct SqfProfile **prof);

void sqf_profile_free(struct SqfProfile *prof);

/**
 * Number of unit residues, or 0 for a null handle.
 */
size_t sqf_profile_len(const struct SqfProfile *prof);

/**
 * Copies residues and counts, in ascending residue order, into buffers of
 * length `len` (which must equal [`sqf_profile_len`]). Either buffer may
 * be null.
 */
enum SqfStatus sqf_profile_counts(const struct SqfProfile *prof,
                                  uint64_t *residues,
                                  uint64_t *counts,
                                  size_t len);

enum SqfStatus sqf_variance(const struct SqfProfile *prof, struct SqfVariance *report);

enum SqfStatus sqf_t_via_convolution(const struct SqfMobiusTable *table,
                                     uint64_t x,
                                     uint64_t q,
                                     uint64_t *t);

enum SqfStatus sqf_character_variance(const struct SqfMobiusTable *table,
                                      uint64_t x,
                                      uint64_t q,
                                      double *value);

/**
 * `gamma` is one of `identity`, `inv`, `mul:c`, `pow:k`, `random`; the
 * seed only matters for `random`.
 */
enum SqfStatus sqf_gamma(const struct SqfProfile *prof,
                         const char *gamma,
                         uint64_t seed,
                         struct SqfGamma *report);

/**
 * Primitive solutions of `w·n = 0` in the box `|nᵢ| ≤ uᵢ`, and the
 * explicit upper bound for that count.
 */
enum SqfStatus sqf_lemma1(const int64_t *w, const double *u, uint64_t *count, double *bound);

enum SqfStatus sqf_lemma2_count(double v1,
                                double v2,
                                uint64_t q,
                                int64_t a1,
                                int64_t a2,
                                uint64_t *count);

/**
 * `M(q, a1, a2)` as a double; exact rational arithmetic is used up to the
 * library's exact-modulus limit.
 */
enum SqfStatus sqf_m_quantity(uint64_t q, int64_t a1, int64_t a2, double *value);

/**
 * Sweep over `qs[0..n]` at fixed `x`, returned as CSV text. Release the
 * string with [`sqf_string_free`].
 */
enum SqfStatus sqf_sweep_csv(const struct SqfMobiusTable *table,
                             uint64_t x,
                             const uint64_t *qs,
                             size_t n,
                             double eps,
                             char **csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQFREE_H */
