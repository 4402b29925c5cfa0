//! Benchmark protocols: static recall sweep, streaming churn cycles, and the
//! two-index ensemble.

use crate::bench::dataset::Dataset;
use crate::bench::metrics::{ground_truth, ground_truth_ids, recall_at_k};
use crate::bench::report::Table;
use crate::edgestore::DecayConfig;
use crate::graph::{GrowthConfig, IndexConfig, IndexOptions, MyceliumIndex};
use crate::hierarchy::RefreshPolicy;
use crate::storage::StorageConfig;
use crate::{Error, NodeId, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::str::FromStr;
use std::time::Instant;

const BATCH: usize = 512;

fn float(x: f64) -> String {
    format!("{x:.6}")
}

// ---------------------------------------------------------------------------
// Static protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct StaticBenchConfig {
    pub k: usize,
    pub ef_list: Vec<usize>,
    pub seed: u64,
    pub quantize: bool,
    pub ram_limit: usize,
}

impl Default for StaticBenchConfig {
    fn default() -> Self {
        let storage = StorageConfig::default();
        Self {
            k: 10,
            ef_list: vec![48, 64, 96, 128, 192, 256],
            seed: 42,
            quantize: true,
            ram_limit: storage.ram_limit_bytes,
        }
    }
}

/// One point on the recall/ef curve.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRow {
    pub ef: usize,
    pub recall: f64,
    pub mean_query_us: f64,
}

/// Build an index over the full base set and sweep recall@k across ef.
pub fn run_static(dataset: &Dataset, cfg: &StaticBenchConfig) -> Result<Vec<StaticRow>> {
    if dataset.base.is_empty() {
        return Err(Error::EmptyInput("base vectors"));
    }
    if dataset.queries.is_empty() {
        return Err(Error::EmptyInput("query vectors"));
    }
    let dim = dataset.base[0].len();
    let config = IndexConfig {
        storage: StorageConfig {
            quantize: cfg.quantize,
            ram_limit_bytes: cfg.ram_limit,
            ..Default::default()
        },
        seed: cfg.seed,
        ..Default::default()
    };
    let mut idx = MyceliumIndex::new(dim, config)?;
    if cfg.quantize {
        idx.fit_quantizer(dataset.base.iter().map(|v| v.as_slice()))?;
    }
    for chunk in dataset.base.chunks(BATCH) {
        idx.insert_batch(chunk)?;
    }
    idx.refresh_hierarchy_now();
    let truth = match &dataset.ground_truth {
        Some(gt) => gt.clone(),
        None => ground_truth(&dataset.base, &dataset.queries, cfg.k),
    };
    let mut rows = Vec::with_capacity(cfg.ef_list.len());
    let mut out = Vec::new();
    for &ef in &cfg.ef_list {
        let ef = ef.max(cfg.k);
        let start = Instant::now();
        let mut results = Vec::with_capacity(dataset.queries.len());
        for q in &dataset.queries {
            idx.search_into(q, cfg.k, ef, &mut out)?;
            results.push(out.iter().map(|&(id, _)| id).collect::<Vec<NodeId>>());
        }
        let elapsed = start.elapsed().as_secs_f64();
        rows.push(StaticRow {
            ef,
            recall: recall_at_k(&results, &truth, cfg.k),
            mean_query_us: elapsed * 1e6 / dataset.queries.len() as f64,
        });
    }
    Ok(rows)
}

/// Deterministic table for static rows; timing stays out of it.
pub fn static_table(rows: &[StaticRow]) -> Table {
    let mut t = Table::new(&["ef", "recall"]);
    for r in rows {
        t.push_row(vec![r.ef.to_string(), float(r.recall)]);
    }
    t
}

// ---------------------------------------------------------------------------
// Streaming protocol
// ---------------------------------------------------------------------------

/// Which mechanism set a streaming run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamVariant {
    /// Everything on: hybrid delete, periodic hierarchy refresh, decay.
    Full,
    /// Hierarchy built once at stream start, then no maintenance at all:
    /// no rebuilds and no hub-delete slot repair.
    NoHierarchyRefresh,
    /// Every delete takes the O(1) bypass path, hubs included, so deleted
    /// hierarchy slots stay dead until the next periodic rebuild.
    PureO1Delete,
    /// Every delete takes the O(k) repair path, cold nodes included.
    OkAllDelete,
    /// The static baseline: mark-only deletes, no bypass, no cleanup, no
    /// reinforcement, and a hierarchy frozen at its initial build.
    Tombstone,
}

impl StreamVariant {
    pub fn name(&self) -> &'static str {
        match self {
            StreamVariant::Full => "full",
            StreamVariant::NoHierarchyRefresh => "no-refresh",
            StreamVariant::PureO1Delete => "pure-o1",
            StreamVariant::OkAllDelete => "ok-all",
            StreamVariant::Tombstone => "tombstone",
        }
    }
}

impl FromStr for StreamVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(StreamVariant::Full),
            "no-refresh" => Ok(StreamVariant::NoHierarchyRefresh),
            "pure-o1" => Ok(StreamVariant::PureO1Delete),
            "ok-all" => Ok(StreamVariant::OkAllDelete),
            "tombstone" => Ok(StreamVariant::Tombstone),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant '{other}' (full, no-refresh, pure-o1, ok-all, tombstone)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamConfig {
    /// Base vectors used for the initial build; the rest feed the
    /// replacement stream as fresh draws (the run errors if it exhausts).
    pub initial: usize,
    pub cycles: usize,
    /// Fraction of live nodes replaced per cycle.
    pub turnover: f64,
    pub k: usize,
    pub ef: usize,
    /// Queries issued per cycle; 0 means the whole query set.
    pub queries_per_cycle: usize,
    pub variant: StreamVariant,
    pub seed: u64,
    pub quantize: bool,
    pub ram_limit: usize,
    /// Full hierarchy rebuilds happen every this many cycles (amortized
    /// maintenance); between rebuilds the hub-delete repair keeps occupied
    /// slots live. 0 disables periodic rebuilds.
    pub refresh_every: usize,
}

impl Default for StreamConfig {
    fn default() -> Self {
        let storage = StorageConfig::default();
        Self {
            initial: 0,
            cycles: 20,
            turnover: 0.05,
            k: 10,
            ef: 64,
            queries_per_cycle: 0,
            variant: StreamVariant::Full,
            seed: 42,
            quantize: true,
            ram_limit: storage.ram_limit_bytes,
            refresh_every: 10,
        }
    }
}

/// Measurements taken at the end of each churn cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamCycleReport {
    pub cycle: usize,
    pub recall: f64,
    pub mean_degree: f64,
    pub dead_fraction: f64,
    /// Fraction of this cycle's deletes that took the repair path.
    pub hub_delete_fraction: f64,
    pub ram_bytes: usize,
    /// Physical bytes held by the edge store (list capacities).
    pub edge_bytes: usize,
    /// Bytes holding live nodes' edges only.
    pub live_edge_bytes: usize,
    pub wall_ms: f64,
}

fn variant_options(variant: StreamVariant) -> IndexOptions {
    match variant {
        StreamVariant::Tombstone => IndexOptions {
            reinforce_edges: false,
            bypass: false,
            cleanup: false,
            beam_skips_deleted: false,
            hierarchy_repair: false,
        },
        StreamVariant::NoHierarchyRefresh => IndexOptions {
            // the ablation removes *all* hierarchy maintenance, the inline
            // hub-delete slot repair included
            hierarchy_repair: false,
            ..IndexOptions::default()
        },
        _ => IndexOptions::default(),
    }
}

/// Run churn cycles: delete a turnover fraction of live nodes, insert the
/// same number of replacements, refresh the hierarchy (variant permitting),
/// then measure recall against the exact live set.
pub fn run_streaming(dataset: &Dataset, cfg: &StreamConfig) -> Result<Vec<StreamCycleReport>> {
    if dataset.base.is_empty() {
        return Err(Error::EmptyInput("base vectors"));
    }
    if dataset.queries.is_empty() {
        return Err(Error::EmptyInput("query vectors"));
    }
    let pool = &dataset.base;
    let initial = if cfg.initial == 0 {
        pool.len() / 2
    } else {
        cfg.initial
    };
    if initial == 0 || initial > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "initial build size {initial} out of range for pool of {}",
            pool.len()
        )));
    }
    if !(0.0..=1.0).contains(&cfg.turnover) {
        return Err(Error::InvalidArgument(format!(
            "turnover {} must be in [0, 1]",
            cfg.turnover
        )));
    }
    let dim = pool[0].len();
    let config = IndexConfig {
        storage: StorageConfig {
            quantize: cfg.quantize,
            ram_limit_bytes: cfg.ram_limit,
            ..Default::default()
        },
        growth: GrowthConfig::streaming(),
        refresh: RefreshPolicy::manual(),
        options: variant_options(cfg.variant),
        seed: cfg.seed,
        ..Default::default()
    };
    let mut idx = MyceliumIndex::new(dim, config)?;
    if cfg.quantize {
        idx.fit_quantizer(pool.iter().map(|v| v.as_slice()))?;
    }
    for chunk in pool[..initial].chunks(BATCH) {
        idx.insert_batch(chunk)?;
    }
    idx.refresh_hierarchy_now();

    // node id -> pool index, for exact ground truth over the live set
    let mut node_pool: Vec<usize> = (0..initial).collect();
    let mut live: Vec<NodeId> = (0..initial as NodeId).collect();
    // replacements are always fresh draws from the unused tail of the pool
    let mut next_pool = initial;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5f72_6d31);
    let n_queries = if cfg.queries_per_cycle == 0 {
        dataset.queries.len()
    } else {
        cfg.queries_per_cycle.min(dataset.queries.len())
    };

    // cycle 0 is the pre-churn baseline; churn cycles are 1..=cycles
    let mut reports = Vec::with_capacity(cfg.cycles + 1);
    let mut out = Vec::new();
    for cycle in 0..=cfg.cycles {
        let start = Instant::now();
        let mut hub_deletes = 0usize;
        let mut n_del = 0usize;
        if cycle > 0 {
            idx.refresh_hub_threshold();
            n_del = ((cfg.turnover * live.len() as f64).round() as usize).min(live.len());
            if next_pool + n_del > pool.len() {
                return Err(Error::InvalidArgument(format!(
                    "replacement pool exhausted at cycle {cycle}: need {n_del} fresh \
                     vectors, {} left",
                    pool.len() - next_pool
                )));
            }
            for _ in 0..n_del {
                let pick = rng.gen_range(0..live.len());
                let id = live.swap_remove(pick);
                match cfg.variant {
                    StreamVariant::Tombstone => idx.delete_tombstone(id)?,
                    StreamVariant::PureO1Delete => idx.delete_cold(id)?,
                    StreamVariant::OkAllDelete => {
                        idx.delete_hub(id)?;
                        hub_deletes += 1;
                    }
                    _ => {
                        if idx.delete(id)? == crate::deletion::DeleteKind::Hub {
                            hub_deletes += 1;
                        }
                    }
                }
            }

            let batch: Vec<Vec<f32>> = pool[next_pool..next_pool + n_del].to_vec();
            node_pool.extend(next_pool..next_pool + n_del);
            next_pool += n_del;
            let new_ids = idx.insert_batch(&batch)?;
            live.extend(new_ids);

            // Hierarchy rebuilds are periodic maintenance, not a per-cycle
            // step: the full system's hub-delete repair keeps the levels
            // serviceable in between, which is exactly what the pure-O(1)
            // variant forgoes. The tombstone baseline is a static index and
            // never rebuilds.
            let rebuild = match cfg.variant {
                StreamVariant::NoHierarchyRefresh | StreamVariant::Tombstone => false,
                _ => cfg.refresh_every != 0 && cycle % cfg.refresh_every == 1 % cfg.refresh_every,
            };
            if rebuild {
                idx.refresh_hierarchy_now();
            }
        }

        let items: Vec<(u32, &[f32])> = live
            .iter()
            .map(|&id| (id, pool[node_pool[id as usize]].as_slice()))
            .collect();
        let truth = ground_truth_ids(&items, &dataset.queries[..n_queries], cfg.k);
        let mut results = Vec::with_capacity(n_queries);
        for q in &dataset.queries[..n_queries] {
            idx.search_into(q, cfg.k, cfg.ef, &mut out)?;
            results.push(out.iter().map(|&(id, _)| id).collect::<Vec<NodeId>>());
        }
        let recall = recall_at_k(&results, &truth, cfg.k);

        if cfg.variant != StreamVariant::Tombstone {
            idx.compact_edges();
        }
        let (mean_degree, _, dead_fraction) = idx.degree_stats();
        reports.push(StreamCycleReport {
            cycle,
            recall,
            mean_degree,
            dead_fraction,
            hub_delete_fraction: if n_del == 0 {
                0.0
            } else {
                hub_deletes as f64 / n_del as f64
            },
            ram_bytes: idx.ram_usage(),
            edge_bytes: idx.edge_store().physical_bytes(),
            live_edge_bytes: idx.live_edge_bytes(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(reports)
}

/// Deterministic table for streaming reports. Wall time is excluded so two
/// runs with the same seed emit byte-identical tables.
pub fn stream_table(reports: &[StreamCycleReport]) -> Table {
    let mut t = Table::new(&[
        "cycle",
        "recall",
        "mean_degree",
        "dead_fraction",
        "hub_delete_fraction",
        "ram_bytes",
        "edge_bytes",
        "live_edge_bytes",
    ]);
    for r in reports {
        t.push_row(vec![
            r.cycle.to_string(),
            float(r.recall),
            float(r.mean_degree),
            float(r.dead_fraction),
            float(r.hub_delete_fraction),
            r.ram_bytes.to_string(),
            r.edge_bytes.to_string(),
            r.live_edge_bytes.to_string(),
        ]);
    }
    t
}

// ---------------------------------------------------------------------------
// Ensemble protocol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub k: usize,
    pub ef: usize,
    pub seed: u64,
    pub quantize: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            k: 10,
            ef: 64,
            seed: 42,
            quantize: true,
        }
    }
}

/// Recall of each member, recall of the merged result, and the mean Jaccard
/// overlap of per-node edge target sets in dataset id space.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub recall_a: f64,
    pub recall_b: f64,
    pub recall_merged: f64,
    pub edge_overlap: f64,
}

fn build_shuffled(
    dataset: &Dataset,
    cfg: &EnsembleConfig,
    seed: u64,
) -> Result<(MyceliumIndex, Vec<u32>)> {
    let dim = dataset.base[0].len();
    let mut perm: Vec<usize> = (0..dataset.base.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let config = IndexConfig {
        storage: StorageConfig {
            quantize: cfg.quantize,
            ..Default::default()
        },
        // members must agree wherever the data agrees, so they build with
        // the order-insensitive profile (wide deterministic candidate pools)
        // and consolidate below
        growth: GrowthConfig::convergent(),
        decay: DecayConfig {
            max_edges_per_node: 32,
            ..Default::default()
        },
        seed,
        ..Default::default()
    };
    let mut idx = MyceliumIndex::new(dim, config)?;
    if cfg.quantize {
        idx.fit_quantizer(dataset.base.iter().map(|v| v.as_slice()))?;
    }
    let shuffled: Vec<Vec<f32>> = perm.iter().map(|&p| dataset.base[p].clone()).collect();
    for chunk in shuffled.chunks(BATCH) {
        idx.insert_batch(chunk)?;
    }
    idx.consolidate_edges(12);
    idx.refresh_hierarchy_now();
    // node id i holds pool vector perm[i]
    let node_pool: Vec<u32> = perm.iter().map(|&p| p as u32).collect();
    Ok((idx, node_pool))
}

/// Mean over dataset ids of |E_a ∩ E_b| / |E_a ∪ E_b|, comparing each node's
/// edge target set across the two indexes in dataset id space.
fn edge_overlap(
    idx_a: &MyceliumIndex,
    pool_a: &[u32],
    idx_b: &MyceliumIndex,
    pool_b: &[u32],
) -> f64 {
    let n = pool_a.len();
    let mut inv_a = vec![0u32; n];
    let mut inv_b = vec![0u32; n];
    for (node, &p) in pool_a.iter().enumerate() {
        inv_a[p as usize] = node as u32;
    }
    for (node, &p) in pool_b.iter().enumerate() {
        inv_b[p as usize] = node as u32;
    }
    let targets = |idx: &MyceliumIndex, pool: &[u32], node: u32| -> Vec<u32> {
        let mut t: Vec<u32> = idx
            .edge_store()
            .edges(node)
            .iter()
            .map(|e| pool[e.target as usize])
            .collect();
        t.sort_unstable();
        t.dedup();
        t
    };
    let mut sum = 0.0f64;
    for p in 0..n {
        let ea = targets(idx_a, pool_a, inv_a[p]);
        let eb = targets(idx_b, pool_b, inv_b[p]);
        let inter = ea.iter().filter(|t| eb.binary_search(t).is_ok()).count();
        let union = ea.len() + eb.len() - inter;
        sum += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
    }
    sum / n as f64
}

/// Build two indexes over independently shuffled insertion orders of the same
/// base, then compare per-query top-k overlap and merged recall.
pub fn run_ensemble(dataset: &Dataset, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    if dataset.base.is_empty() {
        return Err(Error::EmptyInput("base vectors"));
    }
    if dataset.queries.is_empty() {
        return Err(Error::EmptyInput("query vectors"));
    }
    let (mut idx_a, pool_a) = build_shuffled(dataset, cfg, cfg.seed)?;
    let (mut idx_b, pool_b) = build_shuffled(dataset, cfg, cfg.seed.wrapping_add(1))?;
    let truth = match &dataset.ground_truth {
        Some(gt) => gt.clone(),
        None => ground_truth(&dataset.base, &dataset.queries, cfg.k),
    };
    let overlap = edge_overlap(&idx_a, &pool_a, &idx_b, &pool_b);
    let mut results_a = Vec::with_capacity(dataset.queries.len());
    let mut results_b = Vec::with_capacity(dataset.queries.len());
    let mut results_m = Vec::with_capacity(dataset.queries.len());
    let mut out = Vec::new();
    for q in &dataset.queries {
        idx_a.search_into(q, cfg.k, cfg.ef, &mut out)?;
        let a: Vec<u32> = out.iter().map(|&(id, _)| pool_a[id as usize]).collect();
        idx_b.search_into(q, cfg.k, cfg.ef, &mut out)?;
        let b: Vec<u32> = out.iter().map(|&(id, _)| pool_b[id as usize]).collect();

        // merge, dedup, rerank by exact distance
        let mut merged: Vec<u32> = a.iter().chain(b.iter()).copied().collect();
        merged.sort_unstable();
        merged.dedup();
        let mut ranked: Vec<(f64, u32)> = merged
            .into_iter()
            .map(|id| {
                let d: f64 = q
                    .iter()
                    .zip(&dataset.base[id as usize])
                    .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                    .sum();
                (d, id)
            })
            .collect();
        ranked.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let m: Vec<u32> = ranked.into_iter().take(cfg.k).map(|(_, id)| id).collect();

        results_a.push(a);
        results_b.push(b);
        results_m.push(m);
    }
    Ok(EnsembleReport {
        recall_a: recall_at_k(&results_a, &truth, cfg.k),
        recall_b: recall_at_k(&results_b, &truth, cfg.k),
        recall_merged: recall_at_k(&results_m, &truth, cfg.k),
        edge_overlap: overlap,
    })
}

pub fn ensemble_table(report: &EnsembleReport) -> Table {
    let mut t = Table::new(&["recall_a", "recall_b", "recall_merged", "edge_overlap"]);
    t.push_row(vec![
        float(report.recall_a),
        float(report.recall_b),
        float(report.recall_merged),
        float(report.edge_overlap),
    ]);
    t
}
