//! End-to-end acceptance suite. Each numbered check prints a single
//! PASS/FAIL line with the measured values so a full run reads as a report.
//!
//! Heavy fixtures (the 50K desk dataset and the streaming runs) are built
//! once and shared across checks via `OnceLock`.

use mycelium::bench::dataset::{synthetic_dataset, Dataset};
use mycelium::bench::metrics::{ground_truth, recall_at_k};
use mycelium::bench::protocol::{
    run_ensemble, run_static, run_streaming, stream_table, EnsembleConfig, StaticBenchConfig,
    StreamConfig, StreamCycleReport, StreamVariant,
};
use mycelium::edgestore::{effective_importance, MyelialEdge};
use mycelium::graph::{IndexConfig, MyceliumIndex, MAX_BYPASS_HOPS};
use mycelium::storage::StorageConfig;
use mycelium::vecmath::{squared_l2, QuantizationParams, QuantizedVector};
use mycelium::{DecayConfig, DeleteKind, NodeId};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn unquantized(seed: u64) -> IndexConfig {
    IndexConfig {
        storage: StorageConfig {
            quantize: false,
            ..Default::default()
        },
        seed,
        ..Default::default()
    }
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// 50K base / 1K query desk set.
fn desk() -> &'static Dataset {
    static DESK: OnceLock<Dataset> = OnceLock::new();
    DESK.get_or_init(|| synthetic_dataset(50_000, 1000, 32, 16, 42))
}

/// 100K pool for streaming: 50K initial build + 20 cycles of 5% fresh draws.
fn stream_pool() -> &'static Dataset {
    static POOL: OnceLock<Dataset> = OnceLock::new();
    POOL.get_or_init(|| synthetic_dataset(100_000, 1000, 32, 16, 42))
}

fn stream_config(variant: StreamVariant, cycles: usize) -> StreamConfig {
    StreamConfig {
        initial: 50_000,
        cycles,
        turnover: 0.05,
        k: 5,
        ef: 128,
        queries_per_cycle: 0,
        variant,
        seed: 42,
        quantize: false,
        ram_limit: StorageConfig::default().ram_limit_bytes,
        ..StreamConfig::default()
    }
}

struct StreamRuns {
    full: Vec<StreamCycleReport>,
    full_csv: String,
    full_csv_again: String,
    no_refresh: Vec<StreamCycleReport>,
    pure_o1: Vec<StreamCycleReport>,
    /// 8 cycles at 5% turnover: 40% cumulative.
    tombstone8: Vec<StreamCycleReport>,
}

fn stream_runs() -> &'static StreamRuns {
    static RUNS: OnceLock<StreamRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let pool = stream_pool();
        let full = run_streaming(pool, &stream_config(StreamVariant::Full, 20)).unwrap();
        let full_again = run_streaming(pool, &stream_config(StreamVariant::Full, 20)).unwrap();
        let no_refresh =
            run_streaming(pool, &stream_config(StreamVariant::NoHierarchyRefresh, 20)).unwrap();
        let pure_o1 =
            run_streaming(pool, &stream_config(StreamVariant::PureO1Delete, 20)).unwrap();
        let tombstone8 =
            run_streaming(pool, &stream_config(StreamVariant::Tombstone, 8)).unwrap();
        StreamRuns {
            full_csv: stream_table(&full).to_csv(),
            full_csv_again: stream_table(&full_again).to_csv(),
            full,
            no_refresh,
            pure_o1,
            tombstone8,
        }
    })
}

// ---------------------------------------------------------------------------
// 1. Decay math against an independent exponentiation oracle
// ---------------------------------------------------------------------------

/// Binary exponentiation: an arithmetic route independent of exp/ln.
fn pow_oracle(base: f64, mut e: u64) -> f64 {
    let mut acc = 1.0f64;
    let mut b = base;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

#[test]
fn c01_decay_math_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let use_count: f32 = rng.gen_range(0.01..100.0);
        let lambda: f64 = rng.gen_range(0.9..0.99999);
        // keep the decayed value well inside normal f64 range
        let dt_cap = ((600.0 / -lambda.ln()) as u64).min(100_000);
        let dt = rng.gen_range(0..=dt_cap);
        let oracle = use_count as f64 * pow_oracle(lambda, dt);
        let got = effective_importance(use_count, 0, dt, lambda);
        let rel = (got - oracle).abs() / oracle;
        worst = worst.max(rel);
    }
    let anchored = effective_importance(2.0, 0, 10_000, 0.9999);
    let anchored_oracle = 2.0 * pow_oracle(0.9999, 10_000);
    let anchored_rel = (anchored - anchored_oracle).abs() / anchored_oracle;
    let pass = worst <= 1e-9 && anchored_rel <= 1e-9 && (anchored - 0.7357).abs() < 5e-5;
    report(
        1,
        "decay math",
        pass,
        &format!("worst rel err {worst:.2e} over 10^4 triples; 2.0*0.9999^10000 = {anchored:.6}"),
    );
}

// ---------------------------------------------------------------------------
// 2. Quantization error bound and asymmetric distance agreement
// ---------------------------------------------------------------------------

#[test]
fn c02_quantization_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_ratio = 0.0f32;
    for _ in 0..8 {
        let lo: f32 = rng.gen_range(-50.0..50.0);
        let span: f32 = rng.gen_range(0.1..100.0);
        let p = QuantizationParams {
            mins: vec![lo],
            ranges: vec![span],
        };
        // all 256 codes reconstruct to themselves
        for c in 0..=255u8 {
            let back = p.decode(&QuantizedVector { codes: vec![c] });
            assert_eq!(p.encode(&back).codes[0], c, "code {c} round trip");
        }
        // 10^3 random in-range values reconstruct within range/510 (+1 ulp)
        let tol = span / 510.0 + (lo.abs() + span) * f32::EPSILON;
        for _ in 0..1000 {
            let v = rng.gen_range(lo..lo + span);
            let back = p.decode(&p.encode(&[v]))[0];
            let err = (back - v).abs();
            assert!(err <= tol, "err {err} tol {tol} at v={v}");
            worst_ratio = worst_ratio.max(err / (span / 510.0));
        }
    }
    // asymmetric distance agrees with decode-then-L2 within 1e-3 relative
    let dim = 32;
    let p = QuantizationParams {
        mins: (0..dim).map(|_| rng.gen_range(-2.0..0.0)).collect(),
        ranges: (0..dim).map(|_| rng.gen_range(0.5..3.0)).collect(),
    };
    let mut worst_asym = 0.0f32;
    for _ in 0..1000 {
        let q: Vec<f32> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let codes: Vec<u8> = (0..dim).map(|_| rng.gen()).collect();
        let reference = squared_l2(&q, &p.decode(&QuantizedVector { codes: codes.clone() }));
        let got = p.asymmetric_distance(&q, &codes);
        worst_asym = worst_asym.max((got - reference).abs() / reference.max(1e-3));
    }
    let pass = worst_asym <= 1e-3;
    report(
        2,
        "quantization",
        pass,
        &format!(
            "worst reconstruction err {worst_ratio:.3}x of range/510; \
             worst asymmetric rel err {worst_asym:.2e}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Beam search with ef = n on a complete graph is exact
// ---------------------------------------------------------------------------

#[test]
fn c03_complete_graph_oracle_equivalence() {
    let n = 1000usize;
    let dim = 32;
    let k = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let queries: Vec<Vec<f32>> = (0..100)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let config = IndexConfig {
        decay: DecayConfig {
            max_edges_per_node: n,
            ..Default::default()
        },
        ..unquantized(42)
    };
    let mut idx = MyceliumIndex::new(dim, config).unwrap();
    for chunk in base.chunks(256) {
        idx.insert_batch(chunk).unwrap();
    }
    // impose the complete graph
    for a in 0..n as NodeId {
        let list = idx.edge_store_mut().edges_mut(a);
        list.clear();
        for b in 0..n as NodeId {
            if a != b {
                list.push(MyelialEdge {
                    target: b,
                    distance: 0.0,
                    use_count: 1.0,
                    last_update: 0,
                });
            }
        }
    }
    let mut mismatches = 0usize;
    for q in &queries {
        let got: Vec<NodeId> = idx
            .search_with_entries(q, k, n, &[0])
            .unwrap()
            .iter()
            .map(|&(id, _)| id)
            .collect();
        let mut truth: Vec<(f32, NodeId)> = base
            .iter()
            .enumerate()
            .map(|(i, v)| (squared_l2(q, v), i as NodeId))
            .collect();
        truth.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let truth: Vec<NodeId> = truth.iter().take(k).map(|&(_, id)| id).collect();
        if got != truth {
            mismatches += 1;
        }
    }
    report(
        3,
        "oracle equivalence",
        mismatches == 0,
        &format!("{mismatches}/100 queries differ from brute force at ef = n"),
    );
}

// ---------------------------------------------------------------------------
// 4. Static recall floor and monotone ef sweep
// ---------------------------------------------------------------------------

#[test]
fn c04_static_recall_floor() {
    let cfg = StaticBenchConfig {
        k: 10,
        ef_list: vec![48, 64, 96, 128, 192, 256],
        seed: 42,
        quantize: false,
        ram_limit: StorageConfig::default().ram_limit_bytes,
    };
    let rows = run_static(desk(), &cfg).unwrap();
    let at_128 = rows.iter().find(|r| r.ef == 128).unwrap().recall;
    let monotone = rows.windows(2).all(|w| w[1].recall >= w[0].recall - 1e-9);
    let sweep: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.ef, r.recall))
        .collect();
    report(
        4,
        "static recall floor",
        at_128 >= 0.90 && monotone,
        &format!("recall@10 ef=128 = {at_128:.4}; sweep {}", sweep.join(" ")),
    );
}

// ---------------------------------------------------------------------------
// 5. Hierarchical entry vs random entry ablation
// ---------------------------------------------------------------------------

#[test]
fn c05_hierarchy_ablation() {
    let ds = desk();
    let truth = ground_truth(&ds.base, &ds.queries, 10);
    let mut idx = MyceliumIndex::new(32, unquantized(42)).unwrap();
    for chunk in ds.base.chunks(512) {
        idx.insert_batch(chunk).unwrap();
    }
    let hier: Vec<Vec<NodeId>> = ds
        .queries
        .iter()
        .map(|q| {
            idx.search(q, 10, 128)
                .unwrap()
                .iter()
                .map(|&(id, _)| id)
                .collect()
        })
        .collect();
    let hier_recall = recall_at_k(&hier, &truth, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = ds.base.len() as NodeId;
    let random: Vec<Vec<NodeId>> = ds
        .queries
        .iter()
        .map(|q| {
            let entry = rng.gen_range(0..n);
            idx.search_with_entries(q, 10, 128, &[entry])
                .unwrap()
                .iter()
                .map(|&(id, _)| id)
                .collect()
        })
        .collect();
    let random_recall = recall_at_k(&random, &truth, 10);
    let gap = hier_recall - random_recall;
    report(
        5,
        "hierarchy ablation",
        gap >= 0.05,
        &format!(
            "hierarchical {hier_recall:.4} vs random-entry {random_recall:.4} (gap {gap:.4})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Streaming protocol: full vs ablated variants
// ---------------------------------------------------------------------------

#[test]
fn c06_streaming_protocol() {
    let runs = stream_runs();
    let full = runs.full.last().unwrap().recall;
    let no_refresh = runs.no_refresh.last().unwrap().recall;
    let pure_o1 = runs.pure_o1.last().unwrap().recall;
    let pass = full >= 0.85 && full - no_refresh >= 0.10 && full - pure_o1 >= 0.03;
    report(
        6,
        "streaming protocol",
        pass,
        &format!(
            "final recall@5: full {full:.4}, no-refresh {no_refresh:.4} \
             (gap {:.4}), pure-O(1) {pure_o1:.4} (gap {:.4})",
            full - no_refresh,
            full - pure_o1
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Tombstone comparison at 40% cumulative turnover
// ---------------------------------------------------------------------------

#[test]
fn c07_tombstone_comparison() {
    let runs = stream_runs();
    // same-seed runs are deterministic, so the 20-cycle full run's cycle-8
    // row is the 40%-cumulative-turnover state
    let full8 = &runs.full[8];
    let tomb8 = runs.tombstone8.last().unwrap();
    let recall_gap = full8.recall - tomb8.recall;
    let byte_ratio = full8.live_edge_bytes as f64 / tomb8.edge_bytes as f64;
    let pass = recall_gap >= 0.05 && byte_ratio <= 0.5;
    report(
        7,
        "tombstone comparison",
        pass,
        &format!(
            "recall {:.4} vs {:.4} (gap {recall_gap:.4}); \
             live edge bytes {} vs tombstone {} (ratio {byte_ratio:.3})",
            full8.recall, tomb8.recall, full8.live_edge_bytes, tomb8.edge_bytes
        ),
    );
}

// Criterion 8 (visited tracker equivalence + zero allocations) lives in
// tests/alloc.rs: the allocation counter must own the global allocator of its
// test binary.

// ---------------------------------------------------------------------------
// 9. Deletion safety under 10K interleaved deletions
// ---------------------------------------------------------------------------

#[test]
fn c09_deletion_safety() {
    let n = 12_000usize;
    let dim = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut idx = MyceliumIndex::new(dim, unquantized(42)).unwrap();
    for chunk in base.chunks(512) {
        idx.insert_batch(chunk).unwrap();
    }
    let max_ops = idx.decay_config().max_edges_per_node as u64 + 1;
    let mut live: Vec<NodeId> = (0..n as NodeId).collect();
    let mut returned_deleted = 0usize;
    let mut worst_ops = 0u64;
    for i in 0..10_000usize {
        if i % 500 == 0 {
            idx.refresh_hub_threshold();
        }
        let pick = rng.gen_range(0..live.len());
        let id = live.swap_remove(pick);
        if idx.delete(id).unwrap() == DeleteKind::Cold {
            worst_ops = worst_ops.max(idx.last_cold_delete_ops());
        }
        if i % 10 == 0 {
            let q = &base[rng.gen_range(0..n)];
            for (got, _) in idx.search(q, 10, 64).unwrap() {
                if idx.is_deleted(got) {
                    returned_deleted += 1;
                }
            }
        }
    }
    // bypass chains: walking from any deleted node either reaches a live
    // node within MAX_BYPASS_HOPS or the chain is abandoned
    let mut max_hops = 0usize;
    for id in 0..n as NodeId {
        if !idx.is_deleted(id) {
            continue;
        }
        let mut cur = id;
        let mut hops = 0usize;
        while idx.is_deleted(cur) && hops < MAX_BYPASS_HOPS {
            match idx.node_meta(cur).bypass {
                Some(b) => {
                    cur = b;
                    hops += 1;
                }
                None => break,
            }
        }
        if !idx.is_deleted(cur) {
            max_hops = max_hops.max(hops);
        }
    }
    let pass = returned_deleted == 0
        && worst_ops <= max_ops
        && max_hops <= MAX_BYPASS_HOPS
        && MAX_BYPASS_HOPS == 4;
    report(
        9,
        "deletion safety",
        pass,
        &format!(
            "{returned_deleted} deleted ids returned; worst cold-delete ops \
             {worst_ops} (bound {max_ops}); max resolved bypass chain {max_hops} hops"
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. Ensemble overlap and merged recall
// ---------------------------------------------------------------------------

#[test]
fn c10_ensemble() {
    let cfg = EnsembleConfig {
        k: 10,
        ef: 64,
        seed: 42,
        quantize: false,
    };
    let r = run_ensemble(desk(), &cfg).unwrap();
    let single = r.recall_a.max(r.recall_b);
    let pass = r.edge_overlap > 0.5
        && r.edge_overlap < 1.0
        && r.recall_merged >= single - 0.005;
    report(
        10,
        "ensemble",
        pass,
        &format!(
            "edge overlap {:.4}; singles {:.4}/{:.4}, merged {:.4}",
            r.edge_overlap, r.recall_a, r.recall_b, r.recall_merged
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. Determinism: byte-identical reports for same-seed runs
// ---------------------------------------------------------------------------

#[test]
fn c11_determinism() {
    let runs = stream_runs();
    let pass = runs.full_csv == runs.full_csv_again;
    report(
        11,
        "determinism",
        pass,
        &format!(
            "two same-seed streaming runs: {} ({} bytes)",
            if pass {
                "byte-identical CSV"
            } else {
                "CSV reports differ"
            },
            runs.full_csv.len()
        ),
    );
}
