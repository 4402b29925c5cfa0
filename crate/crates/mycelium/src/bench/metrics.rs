//! Brute-force oracle and recall metrics. The oracle is the single source of
//! recall truth for every protocol.

use crate::NodeId;
use rayon::prelude::*;

/// Exact top-k over base indices by squared L2 with double-precision
/// accumulation. Ties break toward the lower id.
pub fn ground_truth(base: &[Vec<f32>], queries: &[Vec<f32>], k: usize) -> Vec<Vec<u32>> {
    let items: Vec<(u32, &[f32])> = base
        .iter()
        .enumerate()
        .map(|(i, v)| (i as u32, v.as_slice()))
        .collect();
    ground_truth_ids(&items, queries, k)
}

/// Exact top-k over an arbitrary (id, vector) collection, for recall against
/// a live subset mid-stream.
pub fn ground_truth_ids(items: &[(u32, &[f32])], queries: &[Vec<f32>], k: usize) -> Vec<Vec<u32>> {
    let k = k.min(items.len());
    queries
        .par_iter()
        .map(|q| {
            let mut dists: Vec<(f64, u32)> = items
                .iter()
                .map(|&(id, v)| {
                    let d: f64 = q
                        .iter()
                        .zip(v.iter())
                        .map(|(&a, &b)| {
                            let diff = a as f64 - b as f64;
                            diff * diff
                        })
                        .sum();
                    (d, id)
                })
                .collect();
            if k > 0 && k < dists.len() {
                dists.select_nth_unstable_by(k - 1, |a, b| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                });
                dists.truncate(k);
            }
            dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.into_iter().map(|(_, id)| id).collect()
        })
        .collect()
}

/// Mean over queries of |top-k results ∩ top-k truth| / k. Short result lists
/// count the missing entries as misses.
pub fn recall_at_k(results: &[Vec<NodeId>], truth: &[Vec<u32>], k: usize) -> f64 {
    assert_eq!(results.len(), truth.len(), "result/truth query count mismatch");
    if results.is_empty() || k == 0 {
        return 0.0;
    }
    let mut total = 0.0f64;
    for (res, tru) in results.iter().zip(truth.iter()) {
        let tru_k = &tru[..k.min(tru.len())];
        let hits = res
            .iter()
            .take(k)
            .filter(|id| tru_k.contains(id))
            .count();
        total += hits as f64 / k as f64;
    }
    total / results.len() as f64
}
