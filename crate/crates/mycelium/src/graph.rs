//! The navigable base graph: node store, best-first beam search with pooled
//! scratch state, and streaming insertion.

use crate::edgestore::{DecayConfig, EdgeStore, MyelialEdge, Retarget};
use crate::hierarchy::{Hierarchy, RefreshPolicy};
use crate::deletion::DeletionConfig;
use crate::storage::{StorageConfig, VectorStore};
use crate::vecmath::QuantizationParams;
use crate::visited::{DenseVisited, VisitedTracker};
use crate::{Error, NodeId, Result, Tick};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Maximum bypass hops followed through chains of deleted nodes before the
/// edge is given up.
pub const MAX_BYPASS_HOPS: usize = 4;

/// Per-node metadata.
#[derive(Debug, Clone, Default)]
pub struct NodeMeta {
    /// Incremented only by real (reinforcing) search queries.
    pub query_use_count: u32,
    pub deleted: bool,
    /// Set only when deleted: the surviving neighbor traversals route through.
    pub bypass: Option<NodeId>,
    pub level: u8,
}

/// Graph growth parameters.
#[derive(Debug, Clone)]
pub struct GrowthConfig {
    pub k_grow: usize,
    pub k_local: usize,
    /// Kleinberg-style shortcuts sampled with probability proportional to
    /// distance^(-alpha). Zero in streaming mode.
    pub k_long_range: usize,
    pub long_range_alpha: f64,
    /// Initial use_count multiplier for reverse edges.
    pub reverse_edge_multiplier: f32,
    pub ef_search: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            k_grow: 8,
            k_local: 6,
            k_long_range: 2,
            long_range_alpha: 2.0,
            reverse_edge_multiplier: 3.0,
            ef_search: 128,
        }
    }
}

impl GrowthConfig {
    /// Streaming profile: no long-range shortcuts.
    pub fn streaming() -> Self {
        Self {
            k_long_range: 0,
            ..Default::default()
        }
    }

    /// Order-insensitive profile for ensemble members: a wide, high-ef
    /// candidate pool and no randomized shortcuts, so each node's
    /// out-plus-in neighborhood reliably contains its true near neighbors.
    /// Pair with [`MyceliumIndex::consolidate_edges`], which reduces those
    /// neighborhoods to the nearest few deterministically; the two together
    /// make independently built members agree wherever the data agrees.
    pub fn convergent() -> Self {
        Self {
            k_grow: 32,
            k_local: 32,
            k_long_range: 0,
            long_range_alpha: 2.0,
            reverse_edge_multiplier: 3.0,
            ef_search: 192,
        }
    }

    fn insert_ef(&self) -> usize {
        self.ef_search.max(self.k_grow * 4)
    }
}

/// Behavior toggles, used by the tombstone baseline.
#[derive(Debug, Clone)]
pub struct IndexOptions {
    pub reinforce_edges: bool,
    pub bypass: bool,
    pub cleanup: bool,
    /// When false (tombstone mode), deleted nodes occupy beam result slots
    /// and are filtered only at output, so ef budget is wasted on them.
    pub beam_skips_deleted: bool,
    /// Part of the O(k) hub-delete repair: splice a live replacement into the
    /// hierarchy slots the deleted hub occupied. Off in ablations that
    /// disable hierarchy maintenance.
    pub hierarchy_repair: bool,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            reinforce_edges: true,
            bypass: true,
            cleanup: true,
            beam_skips_deleted: true,
            hierarchy_repair: true,
        }
    }
}

/// Everything configurable on an index.
#[derive(Debug, Clone, Default)]
pub struct IndexConfig {
    pub storage: StorageConfig,
    pub decay: DecayConfig,
    pub growth: GrowthConfig,
    pub deletion: DeletionConfig,
    pub refresh: RefreshPolicy,
    pub options: IndexOptions,
    pub seed: u64,
}

/// (distance, id) with total order; ties go to the lower id.
#[derive(Clone, Copy, PartialEq, Debug)]
struct DistNode {
    dist: f32,
    id: NodeId,
}

impl Eq for DistNode {}

impl Ord for DistNode {
    #[inline]
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for DistNode {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Pooled per-search state. Acquired once, reused across queries; no part of
/// it allocates on the query path once its high-water capacity is reached.
pub struct SearchScratch {
    visited: DenseVisited,
    candidates: BinaryHeap<Reverse<DistNode>>,
    results: BinaryHeap<DistNode>,
    expanded: Vec<NodeId>,
    traversed: Vec<(NodeId, NodeId)>,
    sorted: Vec<DistNode>,
}

impl SearchScratch {
    pub fn new() -> Self {
        Self {
            visited: DenseVisited::default(),
            candidates: BinaryHeap::with_capacity(4096),
            results: BinaryHeap::with_capacity(512),
            expanded: Vec::with_capacity(2048),
            traversed: Vec::with_capacity(8192),
            sorted: Vec::with_capacity(512),
        }
    }
}

impl Default for SearchScratch {
    fn default() -> Self {
        Self::new()
    }
}

/// The streaming index: storage tier, edge store, node metadata, hierarchy.
pub struct MyceliumIndex {
    pub(crate) store: VectorStore,
    pub(crate) edges: EdgeStore,
    pub(crate) meta: Vec<NodeMeta>,
    pub(crate) tick: Tick,
    pub(crate) decay: DecayConfig,
    pub(crate) growth: GrowthConfig,
    pub(crate) deletion: DeletionConfig,
    pub(crate) options: IndexOptions,
    pub(crate) hierarchy: Hierarchy,
    pub(crate) hub_threshold: Option<crate::deletion::HubThreshold>,
    pub(crate) live_count: usize,
    pub(crate) hub_delete_count: u64,
    pub(crate) cold_delete_count: u64,
    /// Work units (edge scans) performed by the most recent cold delete.
    pub(crate) last_cold_delete_ops: u64,
    scratch: Option<Box<SearchScratch>>,
    seed: u64,
    insert_count: u64,
    inserts_since_cleanup: u64,
    touched: Vec<NodeId>,
    touched_flag: Vec<bool>,
    /// Cached live node with the highest query_use_count (cold-start entry).
    entry_cache: Option<NodeId>,
}

impl MyceliumIndex {
    pub fn new(dim: usize, config: IndexConfig) -> Result<Self> {
        let store = VectorStore::new(dim, config.storage)?;
        Ok(Self {
            store,
            edges: EdgeStore::new(),
            meta: Vec::new(),
            tick: 0,
            decay: config.decay,
            growth: config.growth,
            deletion: config.deletion,
            options: config.options,
            hierarchy: Hierarchy::new(config.refresh),
            hub_threshold: None,
            live_count: 0,
            hub_delete_count: 0,
            cold_delete_count: 0,
            last_cold_delete_ops: 0,
            scratch: Some(Box::new(SearchScratch::new())),
            seed: config.seed,
            insert_count: 0,
            inserts_since_cleanup: 0,
            touched: Vec::new(),
            touched_flag: Vec::new(),
            entry_cache: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.live_count
    }

    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn is_deleted(&self, n: NodeId) -> bool {
        self.meta[n as usize].deleted
    }

    pub fn node_meta(&self, n: NodeId) -> &NodeMeta {
        &self.meta[n as usize]
    }

    pub fn node_metas(&self) -> &[NodeMeta] {
        &self.meta
    }

    pub fn store(&self) -> &VectorStore {
        &self.store
    }

    pub fn edge_store(&self) -> &EdgeStore {
        &self.edges
    }

    /// Direct edge-store access, for harnesses that impose a topology.
    pub fn edge_store_mut(&mut self) -> &mut EdgeStore {
        &mut self.edges
    }

    pub fn decay_config(&self) -> &DecayConfig {
        &self.decay
    }

    pub fn growth_config(&self) -> &GrowthConfig {
        &self.growth
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn last_cold_delete_ops(&self) -> u64 {
        self.last_cold_delete_ops
    }

    pub fn delete_counts(&self) -> (u64, u64) {
        (self.cold_delete_count, self.hub_delete_count)
    }

    pub fn fit_quantizer<'a, I>(&mut self, sample: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let params = QuantizationParams::fit(sample)?;
        self.store.set_params(params)
    }

    /// Live ids, in ascending order.
    pub fn live_ids(&self) -> Vec<NodeId> {
        (0..self.meta.len() as NodeId)
            .filter(|&i| !self.meta[i as usize].deleted)
            .collect()
    }

    /// Mean out-degree over live nodes, max degree, and the fraction of live
    /// nodes' edges whose target is deleted.
    pub fn degree_stats(&self) -> (f64, usize, f64) {
        let meta = &self.meta;
        self.edges.degree_stats(
            |n| !meta[n as usize].deleted,
            |t| meta[t as usize].deleted,
        )
    }

    /// Accounted RAM: hot vectors + edge store + node metadata + hierarchy +
    /// pooled search scratch. The memory-mapped cold file is OS page cache and
    /// is not counted.
    pub fn ram_usage(&self) -> usize {
        let meta_bytes = self.meta.capacity() * std::mem::size_of::<NodeMeta>();
        let scratch_bytes = self
            .scratch
            .as_ref()
            .map(|s| {
                self.meta.len()
                    + s.candidates.capacity() * std::mem::size_of::<DistNode>()
                    + s.results.capacity() * std::mem::size_of::<DistNode>()
                    + s.expanded.capacity() * 4
                    + s.traversed.capacity() * 8
            })
            .unwrap_or(0);
        self.store.hot_bytes()
            + self.edges.physical_bytes()
            + meta_bytes
            + self.hierarchy.heap_bytes()
            + scratch_bytes
            + self.touched_flag.capacity()
            + self.touched.capacity() * 4
    }

    /// Shrink the edge store. Returns reclaimed bytes.
    pub fn compact_edges(&mut self) -> usize {
        self.edges.compact()
    }

    /// Deterministic topology consolidation: rewire every live node to its
    /// `cap` nearest targets among its current out- and in-neighbors (ties
    /// toward lower id), resetting edge importance. The result depends only
    /// on which near-neighbor pairs the build discovered, not on the order
    /// it discovered them in, so independently built indexes converge to
    /// near-identical topology. Intended as a post-build pass.
    pub fn consolidate_edges(&mut self, cap: usize) {
        let n = self.meta.len();
        let mut unions: Vec<Vec<(f32, NodeId)>> = vec![Vec::new(); n];
        for from in 0..n as NodeId {
            if self.meta[from as usize].deleted {
                continue;
            }
            for e in self.edges.edges(from) {
                if e.target == from || self.meta[e.target as usize].deleted {
                    continue;
                }
                unions[from as usize].push((e.distance, e.target));
                unions[e.target as usize].push((e.distance, from));
            }
        }
        let now = self.tick;
        let initial = self.decay.initial_use_count;
        for (i, mut cand) in unions.into_iter().enumerate() {
            if self.meta[i].deleted {
                continue;
            }
            // nearest-first, dedup targets keeping their closest recorded pair
            cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let list = self.edges.edges_mut(i as NodeId);
            list.clear();
            for (d, t) in cand {
                if list.len() == cap {
                    break;
                }
                if list.iter().any(|e| e.target == t) {
                    continue;
                }
                list.push(MyelialEdge {
                    target: t,
                    distance: d,
                    use_count: initial,
                    last_update: now,
                });
            }
        }
        self.edges.compact();
    }

    /// Bytes holding the edges of live nodes only.
    pub fn live_edge_bytes(&self) -> usize {
        let meta = &self.meta;
        self.edges.live_edge_bytes(|n| !meta[n as usize].deleted)
    }

    /// Follow bypass pointers through deleted nodes, up to [`MAX_BYPASS_HOPS`].
    #[inline]
    pub(crate) fn resolve_bypass(meta: &[NodeMeta], mut t: NodeId) -> Option<NodeId> {
        let mut hops = 0;
        while meta[t as usize].deleted {
            if hops >= MAX_BYPASS_HOPS {
                return None;
            }
            match meta[t as usize].bypass {
                Some(b) => {
                    t = b;
                    hops += 1;
                }
                None => return None,
            }
        }
        Some(t)
    }

    /// Cold-start entry point: the live node with the highest
    /// query_use_count, falling back to the lowest live id.
    pub(crate) fn fallback_entry(&self) -> Option<NodeId> {
        if let Some(e) = self.entry_cache {
            if !self.meta[e as usize].deleted {
                return Some(e);
            }
        }
        let mut best: Option<(u32, NodeId)> = None;
        for (i, m) in self.meta.iter().enumerate() {
            if m.deleted {
                continue;
            }
            match best {
                Some((c, _)) if m.query_use_count <= c => {}
                _ => best = Some((m.query_use_count, i as NodeId)),
            }
        }
        best.map(|(_, id)| id)
    }

    pub(crate) fn mark_touched(&mut self, n: NodeId) {
        if self.touched_flag.len() <= n as usize {
            self.touched_flag.resize(self.meta.len().max(n as usize + 1), false);
        }
        if !self.touched_flag[n as usize] {
            self.touched_flag[n as usize] = true;
            self.touched.push(n);
        }
    }

    // ------------------------------------------------------------------
    // Beam search
    // ------------------------------------------------------------------

    fn beam_search_core<T: VisitedTracker>(
        meta: &[NodeMeta],
        edges: &EdgeStore,
        store: &VectorStore,
        options: &IndexOptions,
        query: &[f32],
        ef: usize,
        entries: &[NodeId],
        reinforcing: bool,
        visited: &mut T,
        candidates: &mut BinaryHeap<Reverse<DistNode>>,
        results: &mut BinaryHeap<DistNode>,
        expanded: &mut Vec<NodeId>,
        traversed: &mut Vec<(NodeId, NodeId)>,
    ) {
        visited.grow(meta.len());
        visited.reset();
        candidates.clear();
        results.clear();
        expanded.clear();
        traversed.clear();

        for &e in entries {
            let e = if options.bypass {
                match Self::resolve_bypass(meta, e) {
                    Some(live) => live,
                    None => continue,
                }
            } else {
                e
            };
            if visited.visit(e) {
                continue;
            }
            let d = store.distance_to(query, e);
            candidates.push(Reverse(DistNode { dist: d, id: e }));
            if !meta[e as usize].deleted || !options.beam_skips_deleted {
                results.push(DistNode { dist: d, id: e });
            }
        }

        while let Some(Reverse(node)) = candidates.pop() {
            if results.len() >= ef {
                let worst = *results.peek().unwrap();
                if node > worst {
                    break;
                }
            }
            expanded.push(node.id);
            for edge in edges.edges(node.id) {
                let target = if options.bypass {
                    match Self::resolve_bypass(meta, edge.target) {
                        Some(live) => live,
                        None => continue,
                    }
                } else {
                    edge.target
                };
                if visited.visit(target) {
                    continue;
                }
                let d = store.distance_to(query, target);
                let cand = DistNode {
                    dist: d,
                    id: target,
                };
                if results.len() >= ef && cand > *results.peek().unwrap() {
                    continue;
                }
                if reinforcing {
                    traversed.push((node.id, edge.target));
                }
                candidates.push(Reverse(cand));
                if !meta[target as usize].deleted || !options.beam_skips_deleted {
                    results.push(cand);
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
    }

    fn drain_results(
        scratch: &mut SearchScratch,
        meta: &[NodeMeta],
        k: usize,
        out: &mut Vec<(NodeId, f32)>,
    ) {
        scratch.sorted.clear();
        scratch.sorted.extend(scratch.results.iter().copied());
        scratch.sorted.sort_unstable();
        out.clear();
        // deleted entries can reach the result heap in tombstone mode; they
        // are never returned
        for n in scratch.sorted.iter() {
            if out.len() >= k {
                break;
            }
            if !meta[n.id as usize].deleted {
                out.push((n.id, n.dist));
            }
        }
    }

    /// Best-first beam search from explicit entry points. Readonly: no tick,
    /// no reinforcement, no traffic counting.
    pub fn beam_search_readonly(
        &mut self,
        query: &[f32],
        ef: usize,
        entries: &[NodeId],
    ) -> Result<Vec<(NodeId, f32)>> {
        if ef == 0 {
            return Err(Error::InvalidArgument("ef must be >= 1".into()));
        }
        if entries.is_empty() {
            return Err(Error::EmptyInput("entries"));
        }
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: query.len(),
            });
        }
        let mut scratch = self.scratch.take().unwrap();
        Self::beam_search_core(
            &self.meta,
            &self.edges,
            &self.store,
            &self.options,
            query,
            ef,
            entries,
            false,
            &mut scratch.visited,
            &mut scratch.candidates,
            &mut scratch.results,
            &mut scratch.expanded,
            &mut scratch.traversed,
        );
        let mut out = Vec::new();
        Self::drain_results(&mut scratch, &self.meta, ef, &mut out);
        self.scratch = Some(scratch);
        Ok(out)
    }

    /// Full search: hierarchy descent, reinforcing beam search, tick bump.
    pub fn search(&mut self, query: &[f32], k: usize, ef: usize) -> Result<Vec<(NodeId, f32)>> {
        let mut out = Vec::new();
        self.search_into(query, k, ef, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`search`]: results land in `out`.
    pub fn search_into(
        &mut self,
        query: &[f32],
        k: usize,
        ef: usize,
        out: &mut Vec<(NodeId, f32)>,
    ) -> Result<()> {
        if k > ef {
            return Err(Error::InvalidArgument(format!("k ({k}) must be <= ef ({ef})")));
        }
        if ef == 0 {
            return Err(Error::InvalidArgument("ef must be >= 1".into()));
        }
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: query.len(),
            });
        }
        out.clear();
        if self.live_count == 0 {
            return Ok(());
        }
        self.tick += 1;
        let mut entry_buf = [0 as NodeId; 2];
        let n_entries = self.hierarchy.descend(
            query,
            &self.meta,
            &self.store,
            self.fallback_entry(),
            &mut entry_buf,
        );
        if n_entries == 0 {
            return Ok(());
        }
        let mut scratch = self.scratch.take().unwrap();
        Self::beam_search_core(
            &self.meta,
            &self.edges,
            &self.store,
            &self.options,
            query,
            ef,
            &entry_buf[..n_entries],
            true,
            &mut scratch.visited,
            &mut scratch.candidates,
            &mut scratch.results,
            &mut scratch.expanded,
            &mut scratch.traversed,
        );
        // write phase: apply queued reinforcement and traffic counts
        if self.options.reinforce_edges {
            for &(from, target) in &scratch.traversed {
                self.edges.reinforce_edge(from, target, self.tick, &self.decay);
            }
        }
        // Traffic accrues to the nodes the query actually retrieved (the
        // ef-bounded result set), not to every expanded node: counting
        // expansions lets the entry region's counts snowball until a traffic
        // refresh concentrates the whole hierarchy there.
        let mut best_count = self
            .entry_cache
            .map(|e| self.meta[e as usize].query_use_count)
            .unwrap_or(0);
        for node in scratch.results.iter() {
            let n = node.id;
            let m = &mut self.meta[n as usize];
            m.query_use_count += 1;
            if !m.deleted && m.query_use_count > best_count {
                best_count = m.query_use_count;
                self.entry_cache = Some(n);
            }
        }
        Self::drain_results(&mut scratch, &self.meta, k, out);
        self.scratch = Some(scratch);
        self.hierarchy.note_queries(1);
        self.maybe_refresh_hierarchy();
        Ok(())
    }

    /// Search with explicit entry points and no hierarchy, reinforcement, or
    /// traffic side effects. Used for entry-point ablations.
    pub fn search_with_entries(
        &mut self,
        query: &[f32],
        k: usize,
        ef: usize,
        entries: &[NodeId],
    ) -> Result<Vec<(NodeId, f32)>> {
        if k > ef {
            return Err(Error::InvalidArgument(format!("k ({k}) must be <= ef ({ef})")));
        }
        let mut out = self.beam_search_readonly(query, ef, entries)?;
        out.truncate(k);
        Ok(out)
    }

    /// Readonly search with a caller-supplied visited tracker. Exists so the
    /// dense tracker can be checked against the associative-set reference.
    pub fn search_with_tracker<T: VisitedTracker>(
        &mut self,
        query: &[f32],
        k: usize,
        ef: usize,
        tracker: &mut T,
    ) -> Result<Vec<(NodeId, f32)>> {
        if self.live_count == 0 {
            return Ok(Vec::new());
        }
        let mut entry_buf = [0 as NodeId; 2];
        let n_entries = self.hierarchy.descend(
            query,
            &self.meta,
            &self.store,
            self.fallback_entry(),
            &mut entry_buf,
        );
        if n_entries == 0 {
            return Ok(Vec::new());
        }
        let mut scratch = self.scratch.take().unwrap();
        Self::beam_search_core(
            &self.meta,
            &self.edges,
            &self.store,
            &self.options,
            query,
            ef,
            &entry_buf[..n_entries],
            false,
            tracker,
            &mut scratch.candidates,
            &mut scratch.results,
            &mut scratch.expanded,
            &mut scratch.traversed,
        );
        let mut out = Vec::new();
        Self::drain_results(&mut scratch, &self.meta, k, &mut out);
        self.scratch = Some(scratch);
        Ok(out)
    }

    // ------------------------------------------------------------------
    // Insertion
    // ------------------------------------------------------------------

    /// Insert a vector: store it, find candidates with a readonly beam search,
    /// connect k_local nearest plus sampled long-range shortcuts, and give
    /// each chosen neighbor a (more heavily weighted) reverse edge.
    pub fn insert(&mut self, v: &[f32]) -> Result<NodeId> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let id = self.allocate_node(v)?;
        if self.live_count > 1 {
            let mut entry_buf = [0 as NodeId; 2];
            let n_entries = self.hierarchy.descend(
                v,
                &self.meta,
                &self.store,
                self.fallback_entry_excluding(id),
                &mut entry_buf,
            );
            let entries: Vec<NodeId> = entry_buf[..n_entries]
                .iter()
                .copied()
                .filter(|&e| e != id)
                .collect();
            if !entries.is_empty() {
                let ef = self.growth.insert_ef();
                let mut scratch = self.scratch.take().unwrap();
                Self::beam_search_core(
                    &self.meta,
                    &self.edges,
                    &self.store,
                    &self.options,
                    v,
                    ef,
                    &entries,
                    false,
                    &mut scratch.visited,
                    &mut scratch.candidates,
                    &mut scratch.results,
                    &mut scratch.expanded,
                    &mut scratch.traversed,
                );
                let mut candidates = Vec::new();
                Self::drain_results(&mut scratch, &self.meta, ef, &mut candidates);
                self.scratch = Some(scratch);
                self.connect_new_node(id, &candidates);
            }
        }
        self.after_insertions(1);
        Ok(id)
    }

    /// Insert a batch: candidate searches run in parallel against the graph
    /// as frozen at batch start, then all edges are applied in one write
    /// phase in input order.
    pub fn insert_batch(&mut self, vs: &[Vec<f32>]) -> Result<Vec<NodeId>> {
        if vs.is_empty() {
            return Ok(Vec::new());
        }
        for v in vs {
            if v.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: v.len(),
                });
            }
        }
        let mut ids = Vec::with_capacity(vs.len());
        let mut rest = &vs[..];
        // seed an empty index so the frozen snapshot is searchable
        if self.meta.is_empty() {
            ids.push(self.insert(&vs[0])?);
            rest = &vs[1..];
        }
        // The snapshot advances in windows no larger than the connected part
        // of the graph, so a large batch into a small index cannot collapse
        // into a hub-and-spoke around the few pre-batch nodes.
        while !rest.is_empty() {
            let window = rest.len().min(self.meta.len());
            let (head, tail) = rest.split_at(window);
            ids.extend(self.insert_window(head)?);
            rest = tail;
        }
        Ok(ids)
    }

    /// One frozen-snapshot window of [`insert_batch`].
    fn insert_window(&mut self, vs: &[Vec<f32>]) -> Result<Vec<NodeId>> {
        let first_new = self.meta.len() as NodeId;
        let mut ids = Vec::with_capacity(vs.len());
        for v in vs {
            ids.push(self.allocate_node(v)?);
        }
        // frozen-snapshot candidate phase
        let ef = self.growth.insert_ef();
        let meta = &self.meta;
        let edges = &self.edges;
        let store = &self.store;
        let options = &self.options;
        let hierarchy = &self.hierarchy;
        let fallback = self.fallback_entry_excluding_range(first_new);
        let candidate_sets: Vec<Vec<(NodeId, f32)>> = vs
            .par_iter()
            .map_init(SearchScratch::new, |scratch, v| {
                let mut entry_buf = [0 as NodeId; 2];
                let n_entries = hierarchy.descend(v, meta, store, fallback, &mut entry_buf);
                let entries: Vec<NodeId> = entry_buf[..n_entries]
                    .iter()
                    .copied()
                    .filter(|&e| e < first_new)
                    .collect();
                if entries.is_empty() {
                    return Vec::new();
                }
                Self::beam_search_core(
                    meta,
                    edges,
                    store,
                    options,
                    v,
                    ef,
                    &entries,
                    false,
                    &mut scratch.visited,
                    &mut scratch.candidates,
                    &mut scratch.results,
                    &mut scratch.expanded,
                    &mut scratch.traversed,
                );
                let mut out = Vec::new();
                Self::drain_results(scratch, meta, ef, &mut out);
                out
            })
            .collect();
        // exclusive write phase, in input order
        for (i, candidates) in candidate_sets.iter().enumerate() {
            let id = first_new + i as NodeId;
            self.connect_new_node(id, candidates);
        }
        self.after_insertions(vs.len() as u64);
        Ok(ids)
    }

    fn allocate_node(&mut self, v: &[f32]) -> Result<NodeId> {
        let id = self.meta.len() as NodeId;
        self.store.put_vector(id, v)?;
        self.edges.ensure_node(id);
        self.meta.push(NodeMeta::default());
        self.touched_flag.push(false);
        self.live_count += 1;
        if self.entry_cache.is_none() {
            self.entry_cache = Some(id);
        }
        Ok(id)
    }

    fn fallback_entry_excluding(&self, id: NodeId) -> Option<NodeId> {
        match self.fallback_entry() {
            Some(e) if e == id => self
                .meta
                .iter()
                .enumerate()
                .find(|(i, m)| !m.deleted && *i as NodeId != id)
                .map(|(i, _)| i as NodeId),
            other => other,
        }
    }

    fn fallback_entry_excluding_range(&self, first_new: NodeId) -> Option<NodeId> {
        match self.fallback_entry() {
            Some(e) if e >= first_new => self
                .meta
                .iter()
                .take(first_new as usize)
                .enumerate()
                .find(|(_, m)| !m.deleted)
                .map(|(i, _)| i as NodeId),
            other => other,
        }
    }

    fn connect_new_node(&mut self, id: NodeId, candidates: &[(NodeId, f32)]) {
        let now = self.tick;
        let k_local = self.growth.k_local;
        let reverse_use = self.decay.initial_use_count * self.growth.reverse_edge_multiplier;
        let mut chosen: Vec<(NodeId, f32)> = Vec::with_capacity(self.growth.k_grow);
        for &(t, d) in candidates.iter().take(k_local) {
            if t != id {
                chosen.push((t, d));
            }
        }
        if self.growth.k_long_range > 0 && candidates.len() > k_local {
            let pool = &candidates[k_local..];
            let mut rng = self.node_rng(id);
            let alpha = self.growth.long_range_alpha;
            // weights over true (non-squared) distance^(-alpha)
            let mut weights: Vec<f64> = pool
                .iter()
                .map(|&(_, d)| ((d as f64).sqrt().max(1e-12)).powf(-alpha))
                .collect();
            for _ in 0..self.growth.k_long_range.min(pool.len()) {
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    break;
                }
                let mut r = rng.gen::<f64>() * total;
                let mut pick = 0;
                for (i, w) in weights.iter().enumerate() {
                    r -= w;
                    if r <= 0.0 {
                        pick = i;
                        break;
                    }
                    pick = i;
                }
                chosen.push(pool[pick]);
                weights[pick] = 0.0; // without replacement
            }
        }
        for &(t, d) in &chosen {
            self.edges.add_edge(
                id,
                MyelialEdge {
                    target: t,
                    distance: d,
                    use_count: self.decay.initial_use_count,
                    last_update: now,
                },
                now,
                &self.decay,
            );
            self.edges.add_edge(
                t,
                MyelialEdge {
                    target: id,
                    distance: d,
                    use_count: reverse_use,
                    last_update: now,
                },
                now,
                &self.decay,
            );
            self.mark_touched(t);
        }
        self.mark_touched(id);
    }

    fn node_rng(&self, id: NodeId) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..12].copy_from_slice(&id.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    fn after_insertions(&mut self, n: u64) {
        self.insert_count += n;
        self.inserts_since_cleanup += n;
        if self.options.cleanup && self.inserts_since_cleanup >= self.decay.cleanup_interval {
            self.inserts_since_cleanup = 0;
            self.run_cleanup();
        }
        self.hierarchy.note_inserts(n);
        self.maybe_refresh_hierarchy();
    }

    /// Sweep nodes whose edge lists were touched since the last sweep:
    /// retarget edges through bypasses, drop edges with no surviving bypass,
    /// and remove decay-dead edges.
    pub fn run_cleanup(&mut self) -> usize {
        let touched = std::mem::take(&mut self.touched);
        let mut removed = 0;
        for &n in &touched {
            self.touched_flag[n as usize] = false;
            if self.meta[n as usize].deleted {
                continue;
            }
            removed += self.cleanup_node(n);
        }
        removed
    }

    /// Cleanup a single node's edge list.
    pub fn cleanup_node(&mut self, n: NodeId) -> usize {
        let vec_n = self.store.decode_record(self.store.peek(n));
        let meta = &self.meta;
        let store = &self.store;
        let now = self.tick;
        self.edges.cleanup_node(
            n,
            now,
            &self.decay,
            |t| meta[t as usize].deleted,
            |t| match Self::resolve_bypass(meta, t) {
                Some(live) if live != n => Retarget::To(live, store.distance_to(&vec_n, live)),
                _ => Retarget::Drop,
            },
        )
    }

    pub(crate) fn maybe_refresh_hierarchy(&mut self) {
        if let Some(due) = self.hierarchy.due_levels() {
            self.rebuild_hierarchy_levels(due);
        }
    }

    /// Rebuild both hierarchy levels from current traffic (streaming
    /// cycle-boundary refresh).
    pub fn refresh_hierarchy_now(&mut self) {
        self.rebuild_hierarchy_levels([true, true]);
    }

    fn rebuild_hierarchy_levels(&mut self, due: [bool; 2]) {
        let hierarchy = std::mem::replace(&mut self.hierarchy, Hierarchy::new(RefreshPolicy::default()));
        let rebuilt = hierarchy.rebuilt(due, &self.meta, &self.store);
        for (level, built) in rebuilt.level_indices() {
            for &m in built {
                self.meta[m as usize].level = self.meta[m as usize].level.max(level);
            }
        }
        self.hierarchy = rebuilt;
    }
}
