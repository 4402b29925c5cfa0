#ifndef MYCELIUM_H
#define MYCELIUM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI call.
 */
typedef enum MycStatus {
  MycStatusOk = 0,
  MycStatusInvalidArgument = 1,
  MycStatusDimensionMismatch = 2,
  MycStatusNotFound = 3,
  MycStatusDeleted = 4,
  MycStatusIo = 5,
  MycStatusInternal = 6,
} MycStatus;

/**
 * Opaque index handle.
 */
typedef struct MycIndex MycIndex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create an index for `dim`-dimensional vectors. On success `*out` owns the
 * handle; release it with `myc_index_free`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MycStatus myc_index_new(uintptr_t dim, uint64_t seed, bool quantize, struct MycIndex **out);

/**
 * Destroy an index created by `myc_index_new`. A null handle is a no-op.
 *
 * # Safety
 * `idx` must be null or a pointer previously returned by `myc_index_new`
 * that has not already been freed.
 */
void myc_index_free(struct MycIndex *idx);

/**
 * Fit the 8-bit quantizer on `n` vectors laid out row-major in `sample`.
 * Must be called before the first insert when the index quantizes.
 *
 * # Safety
 * `sample` must point to `n * dim` floats.
 */
enum MycStatus myc_index_fit_quantizer(struct MycIndex *idx, const float *sample, uintptr_t n);

/**
 * Insert one vector of `len` floats; writes the new node id to `out_id`.
 *
 * # Safety
 * `v` must point to `len` floats; `out_id` must be valid.
 */
enum MycStatus myc_index_insert(struct MycIndex *idx,
                                const float *v,
                                uintptr_t len,
                                uint32_t *out_id);

/**
 * Search for the `k` nearest neighbors with beam width `ef`. Ids and squared
 * distances land in the caller's buffers (capacity `k` each); `*out_n` is
 * the number of results written.
 *
 * # Safety
 * `q` must point to `len` floats; `out_ids` and `out_dists` must have room
 * for `k` elements; `out_n` must be valid.
 */
enum MycStatus myc_index_search(struct MycIndex *idx,
                                const float *q,
                                uintptr_t len,
                                uintptr_t k,
                                uintptr_t ef,
                                uint32_t *out_ids,
                                float *out_dists,
                                uintptr_t *out_n);

/**
 * Delete a node through the hybrid cold/hub path.
 *
 * # Safety
 * `idx` must be a live handle.
 */
enum MycStatus myc_index_delete(struct MycIndex *idx, uint32_t id);

/**
 * Total number of nodes ever inserted (deleted nodes included).
 *
 * # Safety
 * `idx` must be a live handle.
 */
uintptr_t myc_index_len(const struct MycIndex *idx);

/**
 * Number of live (non-deleted) nodes.
 *
 * # Safety
 * `idx` must be a live handle.
 */
uintptr_t myc_index_live_count(const struct MycIndex *idx);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MYCELIUM_H */
