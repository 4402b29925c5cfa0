//! C ABI for the mycelium index.
//!
//! Handles are opaque pointers; every call returns a status code and writes
//! results through out-parameters. Panics are caught at the boundary and
//! surfaced as `MYC_STATUS_INTERNAL`.

use mycelium::graph::{IndexConfig, MyceliumIndex};
use mycelium::storage::StorageConfig;
use mycelium::{Error, NodeId};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

/// Status codes returned by every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MycStatus {
    MycStatusOk = 0,
    MycStatusInvalidArgument = 1,
    MycStatusDimensionMismatch = 2,
    MycStatusNotFound = 3,
    MycStatusDeleted = 4,
    MycStatusIo = 5,
    MycStatusInternal = 6,
}

/// Opaque index handle.
pub struct MycIndex {
    inner: MyceliumIndex,
}

fn status_of(e: &Error) -> MycStatus {
    match e {
        Error::DimensionMismatch { .. } => MycStatus::MycStatusDimensionMismatch,
        Error::UnknownNode(_) => MycStatus::MycStatusNotFound,
        Error::NodeDeleted(_) | Error::NodeNotDeleted(_) => MycStatus::MycStatusDeleted,
        Error::Io(_) => MycStatus::MycStatusIo,
        _ => MycStatus::MycStatusInvalidArgument,
    }
}

fn guard<F: FnOnce() -> MycStatus>(f: F) -> MycStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => MycStatus::MycStatusInternal,
    }
}

/// Create an index for `dim`-dimensional vectors. On success `*out` owns the
/// handle; release it with `myc_index_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn myc_index_new(
    dim: usize,
    seed: u64,
    quantize: bool,
    out: *mut *mut MycIndex,
) -> MycStatus {
    if out.is_null() || dim == 0 {
        return MycStatus::MycStatusInvalidArgument;
    }
    guard(|| {
        let config = IndexConfig {
            storage: StorageConfig {
                quantize,
                ..Default::default()
            },
            seed,
            ..Default::default()
        };
        match MyceliumIndex::new(dim, config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MycIndex { inner }));
                MycStatus::MycStatusOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Destroy an index created by `myc_index_new`. A null handle is a no-op.
///
/// # Safety
/// `idx` must be null or a pointer previously returned by `myc_index_new`
/// that has not already been freed.
#[no_mangle]
pub unsafe extern "C" fn myc_index_free(idx: *mut MycIndex) {
    if !idx.is_null() {
        drop(Box::from_raw(idx));
    }
}

/// Fit the 8-bit quantizer on `n` vectors laid out row-major in `sample`.
/// Must be called before the first insert when the index quantizes.
///
/// # Safety
/// `sample` must point to `n * dim` floats.
#[no_mangle]
pub unsafe extern "C" fn myc_index_fit_quantizer(
    idx: *mut MycIndex,
    sample: *const f32,
    n: usize,
) -> MycStatus {
    if idx.is_null() || (sample.is_null() && n > 0) {
        return MycStatus::MycStatusInvalidArgument;
    }
    guard(|| {
        let index = &mut (*idx).inner;
        let dim = index.dim();
        let data = slice::from_raw_parts(sample, n * dim);
        match index.fit_quantizer(data.chunks_exact(dim)) {
            Ok(()) => MycStatus::MycStatusOk,
            Err(e) => status_of(&e),
        }
    })
}

/// Insert one vector of `len` floats; writes the new node id to `out_id`.
///
/// # Safety
/// `v` must point to `len` floats; `out_id` must be valid.
#[no_mangle]
pub unsafe extern "C" fn myc_index_insert(
    idx: *mut MycIndex,
    v: *const f32,
    len: usize,
    out_id: *mut u32,
) -> MycStatus {
    if idx.is_null() || v.is_null() || out_id.is_null() {
        return MycStatus::MycStatusInvalidArgument;
    }
    guard(|| {
        let vec = slice::from_raw_parts(v, len);
        match (*idx).inner.insert(vec) {
            Ok(id) => {
                *out_id = id;
                MycStatus::MycStatusOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Search for the `k` nearest neighbors with beam width `ef`. Ids and squared
/// distances land in the caller's buffers (capacity `k` each); `*out_n` is
/// the number of results written.
///
/// # Safety
/// `q` must point to `len` floats; `out_ids` and `out_dists` must have room
/// for `k` elements; `out_n` must be valid.
#[no_mangle]
pub unsafe extern "C" fn myc_index_search(
    idx: *mut MycIndex,
    q: *const f32,
    len: usize,
    k: usize,
    ef: usize,
    out_ids: *mut u32,
    out_dists: *mut f32,
    out_n: *mut usize,
) -> MycStatus {
    if idx.is_null() || q.is_null() || out_ids.is_null() || out_dists.is_null() || out_n.is_null() {
        return MycStatus::MycStatusInvalidArgument;
    }
    guard(|| {
        let query = slice::from_raw_parts(q, len);
        match (*idx).inner.search(query, k, ef) {
            Ok(results) => {
                let ids = slice::from_raw_parts_mut(out_ids, k);
                let dists = slice::from_raw_parts_mut(out_dists, k);
                for (i, &(id, d)) in results.iter().enumerate() {
                    ids[i] = id;
                    dists[i] = d;
                }
                *out_n = results.len();
                MycStatus::MycStatusOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Delete a node through the hybrid cold/hub path.
///
/// # Safety
/// `idx` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn myc_index_delete(idx: *mut MycIndex, id: u32) -> MycStatus {
    if idx.is_null() {
        return MycStatus::MycStatusInvalidArgument;
    }
    guard(|| match (*idx).inner.delete(id as NodeId) {
        Ok(_) => MycStatus::MycStatusOk,
        Err(e) => status_of(&e),
    })
}

/// Total number of nodes ever inserted (deleted nodes included).
///
/// # Safety
/// `idx` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn myc_index_len(idx: *const MycIndex) -> usize {
    if idx.is_null() {
        return 0;
    }
    (*idx).inner.len()
}

/// Number of live (non-deleted) nodes.
///
/// # Safety
/// `idx` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn myc_index_live_count(idx: *const MycIndex) -> usize {
    if idx.is_null() {
        return 0;
    }
    (*idx).inner.live_count()
}
