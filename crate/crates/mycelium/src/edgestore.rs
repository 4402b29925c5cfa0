//! Edge storage and lifecycle: lazy decay, reinforcement, dead-edge cleanup,
//! and physical compaction.
//!
//! Decay is never applied by a background pass. Each edge stores its
//! importance as of `last_update`; the effective importance at any later tick
//! is `use_count * lambda^(now - last_update)`, evaluated on demand.

use crate::{NodeId, Tick};

/// A directed edge with a decaying importance score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MyelialEdge {
    pub target: NodeId,
    /// Squared L2 distance at creation time.
    pub distance: f32,
    pub use_count: f32,
    pub last_update: Tick,
}

/// Decay and lifecycle parameters.
#[derive(Debug, Clone)]
pub struct DecayConfig {
    /// Decay factor lambda, in (0, 1].
    pub decay_factor: f64,
    /// Edges whose effective importance falls below this are removed at cleanup.
    pub dead_threshold: f64,
    pub initial_use_count: f32,
    pub reinforcement_delta: f32,
    /// Insertions between lazy cleanup sweeps.
    pub cleanup_interval: u64,
    pub max_edges_per_node: usize,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            decay_factor: 0.9999,
            dead_threshold: 0.1,
            initial_use_count: 1.0,
            reinforcement_delta: 1.0,
            cleanup_interval: 500,
            max_edges_per_node: 64,
        }
    }
}

/// Elapsed ticks beyond this are treated as "effectively forever": the decayed
/// importance is indistinguishable from zero for any usable lambda.
const MAX_DECAY_TICKS: u64 = 1_000_000;

/// Effective importance of an edge at tick `now`:
/// `use_count * lambda^(now - last_update)`.
#[inline]
pub fn effective_importance(use_count: f32, last_update: Tick, now: Tick, lambda: f64) -> f64 {
    debug_assert!(now >= last_update, "tick moved backwards");
    let dt = (now - last_update).min(MAX_DECAY_TICKS);
    use_count as f64 * (dt as f64 * lambda.ln()).exp()
}

impl MyelialEdge {
    #[inline]
    pub fn effective(&self, now: Tick, lambda: f64) -> f64 {
        effective_importance(self.use_count, self.last_update, now, lambda)
    }

    /// Materialize the decayed importance, add the reinforcement delta, and
    /// stamp the edge with the current tick.
    pub fn reinforce(&mut self, now: Tick, cfg: &DecayConfig) {
        let materialized = self.effective(now, cfg.decay_factor);
        self.use_count = materialized as f32 + cfg.reinforcement_delta;
        self.last_update = now;
    }
}

/// What cleanup should do with an edge whose target is deleted.
pub enum Retarget {
    /// Rewrite the edge to this live node with the given distance.
    To(NodeId, f32),
    /// No live bypass survives; drop the edge.
    Drop,
}

/// Per-node adjacency lists, capacity-capped, with byte accounting.
#[derive(Debug, Default)]
pub struct EdgeStore {
    lists: Vec<Vec<MyelialEdge>>,
}

impl EdgeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ensure_node(&mut self, id: NodeId) {
        if self.lists.len() <= id as usize {
            self.lists.resize_with(id as usize + 1, Vec::new);
        }
    }

    pub fn node_count(&self) -> usize {
        self.lists.len()
    }

    #[inline]
    pub fn edges(&self, n: NodeId) -> &[MyelialEdge] {
        &self.lists[n as usize]
    }

    pub fn edges_mut(&mut self, n: NodeId) -> &mut Vec<MyelialEdge> {
        &mut self.lists[n as usize]
    }

    /// Append an edge, rejecting duplicates. On a full list the weakest edge
    /// (lowest effective importance, ties broken toward larger distance) is
    /// evicted only if the new edge's importance strictly beats it; on equal
    /// importance the incumbent wins, which preserves the long-range edges
    /// laid down early in a bulk build.
    pub fn add_edge(&mut self, from: NodeId, edge: MyelialEdge, now: Tick, cfg: &DecayConfig) -> bool {
        let list = &mut self.lists[from as usize];
        if list.iter().any(|e| e.target == edge.target) {
            return false;
        }
        if list.len() >= cfg.max_edges_per_node {
            let mut weakest = 0;
            let mut weakest_key = (f64::INFINITY, f32::NEG_INFINITY);
            for (i, e) in list.iter().enumerate() {
                let key = (e.effective(now, cfg.decay_factor), -e.distance);
                if key.0 < weakest_key.0 || (key.0 == weakest_key.0 && key.1 < weakest_key.1) {
                    weakest_key = key;
                    weakest = i;
                }
            }
            if (edge.use_count as f64) > weakest_key.0 {
                list.swap_remove(weakest);
            } else {
                return false;
            }
        }
        list.push(edge);
        true
    }

    /// Reinforce the edge `from -> target` if present.
    pub fn reinforce_edge(&mut self, from: NodeId, target: NodeId, now: Tick, cfg: &DecayConfig) -> bool {
        if let Some(e) = self.lists[from as usize]
            .iter_mut()
            .find(|e| e.target == target)
        {
            e.reinforce(now, cfg);
            true
        } else {
            false
        }
    }

    /// Remove dead edges and resolve edges to deleted targets. `resolve` is
    /// called for deleted targets and returns where the edge should go.
    /// Retargets that collide with an existing edge are dropped as duplicates.
    /// Returns the number of edges removed.
    pub fn cleanup_node<F, D>(
        &mut self,
        n: NodeId,
        now: Tick,
        cfg: &DecayConfig,
        mut is_deleted: D,
        mut resolve: F,
    ) -> usize
    where
        D: FnMut(NodeId) -> bool,
        F: FnMut(NodeId) -> Retarget,
    {
        let list = &mut self.lists[n as usize];
        let before = list.len();
        // First pass: retarget or drop edges pointing at deleted nodes.
        let mut i = 0;
        while i < list.len() {
            if is_deleted(list[i].target) {
                match resolve(list[i].target) {
                    Retarget::To(live, dist) => {
                        if list.iter().any(|e| e.target == live) {
                            list.swap_remove(i);
                            continue;
                        }
                        list[i].target = live;
                        list[i].distance = dist;
                    }
                    Retarget::Drop => {
                        list.swap_remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        // Second pass: drop decayed-dead edges.
        let lambda = cfg.decay_factor;
        let theta = cfg.dead_threshold;
        list.retain(|e| e.effective(now, lambda) >= theta);
        before - list.len()
    }

    pub fn clear_node(&mut self, n: NodeId) {
        self.lists[n as usize].clear();
    }

    /// Shrink every list to its length. Returns reclaimed bytes.
    pub fn compact(&mut self) -> usize {
        let before = self.physical_bytes();
        for list in &mut self.lists {
            list.shrink_to_fit();
        }
        before - self.physical_bytes()
    }

    /// Physical bytes held by the edge store (list capacities).
    pub fn physical_bytes(&self) -> usize {
        self.lists
            .iter()
            .map(|l| l.capacity() * std::mem::size_of::<MyelialEdge>())
            .sum::<usize>()
            + self.lists.capacity() * std::mem::size_of::<Vec<MyelialEdge>>()
    }

    /// Bytes needed for the edges of live nodes only.
    pub fn live_edge_bytes<D: FnMut(NodeId) -> bool>(&self, mut is_live: D) -> usize {
        self.lists
            .iter()
            .enumerate()
            .filter(|(i, _)| is_live(*i as NodeId))
            .map(|(_, l)| l.len() * std::mem::size_of::<MyelialEdge>())
            .sum()
    }

    /// Mean/max out-degree over live nodes and the fraction of those nodes'
    /// edges whose target is deleted.
    pub fn degree_stats<L, D>(&self, mut is_live: L, mut is_deleted: D) -> (f64, usize, f64)
    where
        L: FnMut(NodeId) -> bool,
        D: FnMut(NodeId) -> bool,
    {
        let mut live_nodes = 0usize;
        let mut total_edges = 0usize;
        let mut max_degree = 0usize;
        let mut dead_edges = 0usize;
        for (i, list) in self.lists.iter().enumerate() {
            if !is_live(i as NodeId) {
                continue;
            }
            live_nodes += 1;
            total_edges += list.len();
            max_degree = max_degree.max(list.len());
            dead_edges += list.iter().filter(|e| is_deleted(e.target)).count();
        }
        let mean = if live_nodes == 0 {
            0.0
        } else {
            total_edges as f64 / live_nodes as f64
        };
        let dead_fraction = if total_edges == 0 {
            0.0
        } else {
            dead_edges as f64 / total_edges as f64
        };
        (mean, max_degree, dead_fraction)
    }
}
