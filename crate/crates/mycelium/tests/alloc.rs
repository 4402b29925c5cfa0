//! Visited-tracker equivalence and the zero-allocation guarantee for the
//! query loop. This lives in its own test binary because it must own the
//! global allocator.

use mycelium::bench::dataset::synthetic_dataset;
use mycelium::graph::{IndexConfig, MyceliumIndex};
use mycelium::storage::StorageConfig;
use mycelium::visited::{DenseVisited, HashVisited};
use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

struct CountingAlloc;

static COUNTING: AtomicBool = AtomicBool::new(false);
static ALLOCS: AtomicU64 = AtomicU64::new(0);

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        if COUNTING.load(Ordering::Relaxed) {
            ALLOCS.fetch_add(1, Ordering::Relaxed);
        }
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        if COUNTING.load(Ordering::Relaxed) {
            ALLOCS.fetch_add(1, Ordering::Relaxed);
        }
        System.realloc(ptr, layout, new_size)
    }
}

#[global_allocator]
static GLOBAL: CountingAlloc = CountingAlloc;

#[test]
fn c08_tracker_equivalence_and_zero_alloc() {
    let ds = synthetic_dataset(10_000, 1000, 32, 16, 8);
    let config = IndexConfig {
        storage: StorageConfig {
            quantize: false,
            ..Default::default()
        },
        seed: 42,
        ..Default::default()
    };
    let mut idx = MyceliumIndex::new(32, config).unwrap();
    for chunk in ds.base.chunks(512) {
        idx.insert_batch(chunk).unwrap();
    }

    // identical results from the bit-vector and associative-set trackers
    let mut dense = DenseVisited::default();
    let mut hash = HashVisited::default();
    let mut mismatches = 0usize;
    for q in &ds.queries {
        let a = idx.search_with_tracker(q, 10, 64, &mut dense).unwrap();
        let b = idx.search_with_tracker(q, 10, 64, &mut hash).unwrap();
        if a != b {
            mismatches += 1;
        }
    }

    // warm up the pooled scratch and output buffer, then count allocations
    let mut out = Vec::new();
    for q in ds.queries.iter().take(100) {
        idx.search_into(q, 10, 64, &mut out).unwrap();
    }
    ALLOCS.store(0, Ordering::SeqCst);
    COUNTING.store(true, Ordering::SeqCst);
    for q in &ds.queries {
        idx.search_into(q, 10, 64, &mut out).unwrap();
    }
    COUNTING.store(false, Ordering::SeqCst);
    let allocs = ALLOCS.load(Ordering::SeqCst);

    let pass = mismatches == 0 && allocs == 0;
    println!(
        "criterion 8 (tracker equivalence + zero alloc): {} — {mismatches}/1000 \
         tracker mismatches; {allocs} allocations across 1000 warm queries",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}
