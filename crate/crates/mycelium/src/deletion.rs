//! Hybrid streaming deletion.
//!
//! Cold nodes (the bottom 90% by query traffic) get an O(1) soft delete: a
//! bypass pointer to their closest surviving neighbor, with incoming edges
//! repaired lazily by cleanup. Hub nodes (top 10%) get an O(k) beam-search
//! repair that gives each known in-neighbor a replacement edge before the
//! soft delete.

use crate::edgestore::MyelialEdge;
use crate::graph::MyceliumIndex;
use crate::{Error, NodeId, Result};

#[derive(Debug, Clone)]
pub struct DeletionConfig {
    /// Fraction of live nodes classified as hubs.
    pub hub_fraction: f64,
    /// Retained as a knob for the alternative "below 2x mean traffic" cold
    /// definition; inactive by default (the top-fraction rule is used).
    pub cold_multiplier: f64,
    pub repair_ef: usize,
}

impl Default for DeletionConfig {
    fn default() -> Self {
        Self {
            hub_fraction: 0.10,
            cold_multiplier: 2.0,
            repair_ef: 64,
        }
    }
}

/// Boundary key of the last hub slot under (count desc, id asc) ranking.
/// A node is a hub iff its key ranks at or above the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HubThreshold {
    pub cutoff_count: u32,
    pub cutoff_id: NodeId,
}

impl HubThreshold {
    #[inline]
    pub fn is_hub(&self, query_use_count: u32, id: NodeId) -> bool {
        query_use_count > self.cutoff_count
            || (query_use_count == self.cutoff_count && id <= self.cutoff_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeleteKind {
    Cold,
    Hub,
}

impl MyceliumIndex {
    /// Rank live nodes by traffic and return the boundary of the top
    /// `hub_fraction` slots. None when the index has no live nodes.
    pub fn compute_hub_threshold(&self) -> Option<HubThreshold> {
        let mut ranked: Vec<(u32, NodeId)> = self
            .meta
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.deleted)
            .map(|(i, m)| (m.query_use_count, i as NodeId))
            .collect();
        if ranked.is_empty() {
            return None;
        }
        let hubs = ((self.deletion.hub_fraction * ranked.len() as f64).ceil() as usize)
            .clamp(1, ranked.len());
        ranked.select_nth_unstable_by(hubs - 1, |a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let (count, id) = ranked[hubs - 1];
        Some(HubThreshold {
            cutoff_count: count,
            cutoff_id: id,
        })
    }

    /// Recompute and cache the hub/cold boundary (called at cycle start in
    /// streaming runs).
    pub fn refresh_hub_threshold(&mut self) {
        self.hub_threshold = self.compute_hub_threshold();
    }

    pub fn classify(&self, n: NodeId, threshold: &HubThreshold) -> Result<DeleteKind> {
        let m = self
            .meta
            .get(n as usize)
            .ok_or(Error::UnknownNode(n))?;
        if m.deleted {
            return Err(Error::NodeDeleted(n));
        }
        if threshold.is_hub(m.query_use_count, n) {
            Ok(DeleteKind::Hub)
        } else {
            Ok(DeleteKind::Cold)
        }
    }

    /// Classify against the cached threshold (computing it if absent) and
    /// dispatch to the cold or hub path.
    pub fn delete(&mut self, n: NodeId) -> Result<DeleteKind> {
        if self.hub_threshold.is_none() {
            self.refresh_hub_threshold();
        }
        let threshold = self.hub_threshold.ok_or(Error::UnknownNode(n))?;
        match self.classify(n, &threshold)? {
            DeleteKind::Hub => {
                self.delete_hub(n)?;
                Ok(DeleteKind::Hub)
            }
            DeleteKind::Cold => {
                self.delete_cold(n)?;
                Ok(DeleteKind::Cold)
            }
        }
    }

    /// O(1) soft delete: one scan of n's own edge list picks the closest live
    /// out-neighbor as the bypass. Incoming edges are left for lazy cleanup.
    pub fn delete_cold(&mut self, n: NodeId) -> Result<()> {
        self.check_live(n)?;
        let mut ops = 0u64;
        let mut bypass: Option<(f32, NodeId)> = None;
        for e in self.edges.edges(n) {
            ops += 1;
            if self.meta[e.target as usize].deleted {
                continue;
            }
            match bypass {
                Some((d, id))
                    if e.distance > d || (e.distance == d && e.target >= id) => {}
                _ => bypass = Some((e.distance, e.target)),
            }
        }
        let m = &mut self.meta[n as usize];
        m.deleted = true;
        m.bypass = bypass.map(|(_, id)| id);
        self.edges.clear_node(n);
        self.store.evict_id(n);
        self.live_count -= 1;
        self.cold_delete_count += 1;
        self.last_cold_delete_ops = ops + 1;
        Ok(())
    }

    /// O(k) repair then soft delete: a readonly beam search (ef = repair_ef)
    /// seeded from n's live neighbors with n's own vector as the query yields
    /// candidates; each live in-neighbor (known from the reverse edges created
    /// at insertion) gets a replacement edge to its nearest candidate.
    pub fn delete_hub(&mut self, n: NodeId) -> Result<usize> {
        self.check_live(n)?;
        let neighbors: Vec<NodeId> = self
            .edges
            .edges(n)
            .iter()
            .map(|e| e.target)
            .filter(|&t| !self.meta[t as usize].deleted)
            .collect();
        let mut repaired = 0usize;
        if !neighbors.is_empty() {
            let query = self.store.decode_record(self.store.peek(n));
            let mut candidates = self
                .beam_search_readonly(&query, self.deletion.repair_ef, &neighbors)?;
            candidates.retain(|&(c, _)| c != n);
            // keep the hierarchy slots this hub occupied alive: splice in the
            // nearest live candidate (part of what the O(k) budget buys)
            if self.options.hierarchy_repair {
                let live: Vec<NodeId> = candidates
                    .iter()
                    .map(|&(c, _)| c)
                    .filter(|&c| !self.meta[c as usize].deleted)
                    .take(8)
                    .collect();
                self.hierarchy.replace_member(n, &live);
            }
            // in-neighbors mirrored by insertion-time reverse edges
            let in_neighbors: Vec<NodeId> = neighbors
                .iter()
                .copied()
                .filter(|&t| self.edges.edges(t).iter().any(|e| e.target == n))
                .collect();
            let now = self.tick;
            for i in in_neighbors {
                let vec_i = self.store.decode_record(self.store.peek(i));
                let mut best: Option<(f32, NodeId)> = None;
                for &(c, _) in &candidates {
                    if c == i || self.meta[c as usize].deleted {
                        continue;
                    }
                    let d = self.store.distance_to(&vec_i, c);
                    match best {
                        Some((bd, bid)) if d > bd || (d == bd && c >= bid) => {}
                        _ => best = Some((d, c)),
                    }
                }
                if let Some((d, c)) = best {
                    let accepted = self.edges.add_edge(
                        i,
                        MyelialEdge {
                            target: c,
                            distance: d,
                            use_count: self.decay.initial_use_count,
                            last_update: now,
                        },
                        now,
                        &self.decay,
                    );
                    if accepted {
                        repaired += 1;
                        self.mark_touched(i);
                    }
                }
            }
        }
        // soft delete as in the cold path
        self.delete_cold(n)?;
        self.cold_delete_count -= 1;
        self.hub_delete_count += 1;
        Ok(repaired)
    }

    /// Tombstone-baseline delete: mark only. No bypass, no edge clearing, no
    /// repair; the node stays physically present and degrades searches.
    pub fn delete_tombstone(&mut self, n: NodeId) -> Result<()> {
        self.check_live(n)?;
        self.meta[n as usize].deleted = true;
        self.live_count -= 1;
        Ok(())
    }

    fn check_live(&self, n: NodeId) -> Result<()> {
        let m = self
            .meta
            .get(n as usize)
            .ok_or(Error::UnknownNode(n))?;
        if m.deleted {
            return Err(Error::NodeDeleted(n));
        }
        Ok(())
    }
}
