//! Living hierarchy: navigational levels whose membership is earned by
//! accumulated query traffic.
//!
//! Two levels sit above the base graph. Each refresh re-ranks live nodes by
//! query_use_count and rebuilds level adjacency from scratch; levels are
//! immutable between refreshes. Search descends Level 2 -> Level 1 -> base.

use crate::graph::NodeMeta;
use crate::storage::VectorStore;
use crate::vecmath::squared_l2;
use crate::NodeId;
use std::collections::HashMap;

/// Refresh triggers. Insert intervals are per level; the query interval
/// refreshes both. In streaming runs `per_cycle` marks that the harness
/// rebuilds both levels at every cycle boundary instead.
#[derive(Debug, Clone)]
pub struct RefreshPolicy {
    pub l1_insert_interval: u64,
    pub l2_insert_interval: u64,
    pub query_interval: u64,
    pub per_cycle: bool,
}

impl Default for RefreshPolicy {
    fn default() -> Self {
        Self {
            l1_insert_interval: 10_000,
            l2_insert_interval: 50_000,
            query_interval: 5_000,
            per_cycle: false,
        }
    }
}

impl RefreshPolicy {
    /// Disable all counter-driven refreshes (streaming harness drives
    /// refreshes explicitly at cycle boundaries).
    pub fn manual() -> Self {
        Self {
            l1_insert_interval: u64::MAX,
            l2_insert_interval: u64::MAX,
            query_interval: u64::MAX,
            per_cycle: true,
        }
    }
}

/// One navigational level: ranked members plus within-level adjacency.
#[derive(Debug)]
pub struct HierarchyLevel {
    pub level_index: u8,
    /// Sorted by (query_use_count desc, id asc); members[0] carries the most
    /// traffic and seeds greedy descent.
    members: Vec<NodeId>,
    adjacency: Vec<Vec<NodeId>>,
    pos: HashMap<NodeId, u32>,
    pub k_level: usize,
}

impl HierarchyLevel {
    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn neighbors(&self, member: NodeId) -> &[NodeId] {
        match self.pos.get(&member) {
            Some(&i) => &self.adjacency[i as usize],
            None => &[],
        }
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.pos.contains_key(&n)
    }

    fn heap_bytes(&self) -> usize {
        self.members.capacity() * 4
            + self
                .adjacency
                .iter()
                .map(|a| a.capacity() * 4)
                .sum::<usize>()
            + self.pos.len() * 12
    }
}

/// Threshold above which level kNN construction switches from brute force to
/// an incremental graph build.
const BRUTE_FORCE_MEMBER_LIMIT: usize = 2000;

#[derive(Debug)]
pub struct Hierarchy {
    pub policy: RefreshPolicy,
    pub l1_ratio: f64,
    pub l2_ratio: f64,
    pub k_l1: usize,
    pub k_l2: usize,
    // [Level 1, Level 2]
    levels: [Option<HierarchyLevel>; 2],
    inserts_since: [u64; 2],
    queries_since: u64,
    refresh_count: u64,
}

impl Hierarchy {
    pub fn new(policy: RefreshPolicy) -> Self {
        Self {
            policy,
            l1_ratio: 0.02,
            l2_ratio: 0.001,
            k_l1: 16,
            k_l2: 32,
            levels: [None, None],
            inserts_since: [0, 0],
            queries_since: 0,
            refresh_count: 0,
        }
    }

    pub fn level(&self, level_index: u8) -> Option<&HierarchyLevel> {
        match level_index {
            1 => self.levels[0].as_ref(),
            2 => self.levels[1].as_ref(),
            _ => None,
        }
    }

    pub fn is_built(&self) -> bool {
        self.levels[0].is_some()
    }

    pub fn refresh_count(&self) -> u64 {
        self.refresh_count
    }

    pub fn heap_bytes(&self) -> usize {
        self.levels
            .iter()
            .flatten()
            .map(|l| l.heap_bytes())
            .sum()
    }

    pub fn note_inserts(&mut self, n: u64) {
        self.inserts_since[0] += n;
        self.inserts_since[1] += n;
    }

    pub fn note_queries(&mut self, n: u64) {
        self.queries_since += n;
    }

    /// Which levels are due for a refresh, if any. The query trigger refreshes
    /// both levels.
    pub fn due_levels(&self) -> Option<[bool; 2]> {
        let query_due = self.queries_since >= self.policy.query_interval;
        let l1 = query_due || self.inserts_since[0] >= self.policy.l1_insert_interval;
        let l2 = query_due || self.inserts_since[1] >= self.policy.l2_insert_interval;
        if l1 || l2 {
            Some([l1, l2])
        } else {
            None
        }
    }

    /// Rebuild the due levels from current traffic. All counters reset
    /// jointly on any refresh.
    ///
    /// Level 1 is the top `l1_ratio` fraction by traffic. Level 2 is a
    /// farthest-point subset of Level 1's members rather than the raw global
    /// top by count: membership is still traffic-earned (every member sits in
    /// the top traffic fraction), but the spread constraint stops a single
    /// dense region from crowding out the rest of the space. An entry level
    /// concentrated in one region sends queries from elsewhere to the wrong
    /// neighborhood, and the traffic those misrouted queries accrue there
    /// concentrates the next refresh further — a feedback loop that collapses
    /// recall under churn.
    pub fn rebuilt(mut self, due: [bool; 2], meta: &[NodeMeta], store: &VectorStore) -> Self {
        if due[0] {
            self.levels[0] = Self::build_level(1, self.l1_ratio, self.k_l1, meta, store);
        }
        if due[1] {
            let live = meta.iter().filter(|m| !m.deleted).count();
            let m2 = ((self.l2_ratio * live as f64).ceil() as usize).clamp(1, live.max(1));
            self.levels[1] = match &self.levels[0] {
                Some(l1) => Self::build_level_spread(2, l1.members(), m2, self.k_l2, store),
                None => Self::build_level(2, self.l2_ratio, self.k_l2, meta, store),
            };
        }
        self.inserts_since = [0, 0];
        self.queries_since = 0;
        self.refresh_count += 1;
        self
    }

    /// Build a level from a farthest-point subset of `pool` (ranked by
    /// traffic, best first): seed with the top-ranked member, then repeatedly
    /// add the pool member farthest from everything selected so far.
    fn build_level_spread(
        level_index: u8,
        pool: &[NodeId],
        m: usize,
        k_level: usize,
        store: &VectorStore,
    ) -> Option<HierarchyLevel> {
        if pool.is_empty() {
            return None;
        }
        let m = m.min(pool.len());
        let vectors: Vec<Vec<f32>> = pool
            .iter()
            .map(|&id| store.decode_record(store.peek(id)))
            .collect();
        let mut selected: Vec<usize> = Vec::with_capacity(m);
        // min squared distance from each pool entry to the selected set
        let mut min_d = vec![f32::INFINITY; pool.len()];
        let mut next = 0usize; // top-traffic seed
        for _ in 0..m {
            selected.push(next);
            let picked = next;
            let mut best = (f32::NEG_INFINITY, 0usize);
            for (i, d) in min_d.iter_mut().enumerate() {
                let nd = squared_l2(&vectors[i], &vectors[picked]);
                if nd < *d {
                    *d = nd;
                }
                // farthest next, ties toward better traffic rank (lower i)
                if *d > best.0 && !selected.contains(&i) {
                    best = (*d, i);
                }
            }
            next = best.1;
        }
        let members: Vec<NodeId> = selected.iter().map(|&i| pool[i]).collect();
        let member_vecs: Vec<Vec<f32>> = selected.iter().map(|&i| vectors[i].clone()).collect();
        let k = k_level.min(members.len().saturating_sub(1));
        let adjacency = Self::knn_brute_force(&members, &member_vecs, k);
        let pos = members
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect();
        Some(HierarchyLevel {
            level_index,
            members,
            adjacency,
            pos,
            k_level,
        })
    }

    /// Splice a replacement into every level slot `dead` occupies: same rank
    /// slot, same within-level adjacency, in-level links redirected. Levels
    /// stay immutable in shape between refreshes; this only keeps the
    /// occupied slots live. The first candidate that is not already a member
    /// of the level wins. Returns how many levels were patched.
    pub fn replace_member(&mut self, dead: NodeId, candidates: &[NodeId]) -> usize {
        let mut patched = 0;
        for level in self.levels.iter_mut().flatten() {
            let Some(&slot) = level.pos.get(&dead) else {
                continue;
            };
            let Some(&sub) = candidates.iter().find(|c| !level.pos.contains_key(c)) else {
                continue;
            };
            level.members[slot as usize] = sub;
            level.pos.remove(&dead);
            level.pos.insert(sub, slot);
            for adj in level.adjacency.iter_mut() {
                for t in adj.iter_mut() {
                    if *t == dead {
                        *t = sub;
                    }
                }
            }
            patched += 1;
        }
        patched
    }

    pub fn level_indices(&self) -> impl Iterator<Item = (u8, &[NodeId])> {
        self.levels
            .iter()
            .flatten()
            .map(|l| (l.level_index, l.members.as_slice()))
    }

    /// Rank live nodes by traffic and connect the top `ratio` fraction into a
    /// within-level kNN graph. Returns None when there are no live nodes.
    pub fn build_level(
        level_index: u8,
        ratio: f64,
        k_level: usize,
        meta: &[NodeMeta],
        store: &VectorStore,
    ) -> Option<HierarchyLevel> {
        let mut ranked: Vec<(u32, NodeId)> = meta
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.deleted)
            .map(|(i, m)| (m.query_use_count, i as NodeId))
            .collect();
        if ranked.is_empty() {
            return None;
        }
        ranked.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let m = ((ratio * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len());
        let members: Vec<NodeId> = ranked[..m].iter().map(|&(_, id)| id).collect();
        let vectors: Vec<Vec<f32>> = members
            .iter()
            .map(|&id| store.decode_record(store.peek(id)))
            .collect();
        let k = k_level.min(m.saturating_sub(1));
        let adjacency = if m <= BRUTE_FORCE_MEMBER_LIMIT {
            Self::knn_brute_force(&members, &vectors, k)
        } else {
            Self::knn_incremental(&members, &vectors, k)
        };
        let pos = members
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect();
        Some(HierarchyLevel {
            level_index,
            members,
            adjacency,
            pos,
            k_level,
        })
    }

    fn knn_brute_force(members: &[NodeId], vectors: &[Vec<f32>], k: usize) -> Vec<Vec<NodeId>> {
        let m = members.len();
        (0..m)
            .map(|i| {
                let mut dists: Vec<(f32, NodeId)> = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| (squared_l2(&vectors[i], &vectors[j]), members[j]))
                    .collect();
                if k < dists.len() {
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

    /// Incremental build for large member sets: insert members in rank order,
    /// locating neighbors with a bounded best-first search over the partial
    /// level graph, then mirror edges (capped at k).
    fn knn_incremental(members: &[NodeId], vectors: &[Vec<f32>], k: usize) -> Vec<Vec<NodeId>> {
        let m = members.len();
        let mut adjacency: Vec<Vec<(f32, u32)>> = vec![Vec::new(); m];
        let ef = (k * 3).max(16);
        let mut visited = vec![u32::MAX; m];
        for i in 1..m {
            // best-first over local indices, seeded at the top-ranked member
            let mut frontier: Vec<(f32, u32)> = vec![(squared_l2(&vectors[i], &vectors[0]), 0)];
            visited[0] = i as u32;
            let mut found: Vec<(f32, u32)> = Vec::new();
            while let Some(pos) = frontier
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .map(|(p, _)| p)
            {
                let (d, j) = frontier.swap_remove(pos);
                if found.len() >= ef {
                    let worst = found.iter().map(|f| f.0).fold(0.0f32, f32::max);
                    if d > worst {
                        break;
                    }
                }
                found.push((d, j));
                for &(_, nb) in &adjacency[j as usize] {
                    if visited[nb as usize] == i as u32 {
                        continue;
                    }
                    visited[nb as usize] = i as u32;
                    frontier.push((squared_l2(&vectors[i], &vectors[nb as usize]), nb));
                }
            }
            found.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            found.truncate(k);
            for &(d, j) in &found {
                adjacency[i].push((d, j));
                let back = &mut adjacency[j as usize];
                back.push((d, i as u32));
                if back.len() > k {
                    // drop the farthest mirrored edge
                    let worst = back
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                        .map(|(p, _)| p)
                        .unwrap();
                    back.swap_remove(worst);
                }
            }
        }
        adjacency
            .into_iter()
            .map(|mut a| {
                a.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
                a.into_iter().map(|(_, j)| members[j as usize]).collect()
            })
            .collect()
    }

    /// Greedy descent: Level 2 from its top-traffic member, the winner seeds
    /// Level 1, and the Level 1 winner plus the global max-traffic node become
    /// base-graph entries. Returns the number of entries written.
    pub fn descend(
        &self,
        query: &[f32],
        meta: &[NodeMeta],
        store: &VectorStore,
        fallback: Option<NodeId>,
        out: &mut [NodeId; 2],
    ) -> usize {
        let mut seed: Option<NodeId> = None;
        if let Some(l2) = &self.levels[1] {
            if let Some(s) = Self::first_live(&l2.members, meta) {
                seed = Some(Self::greedy(l2, query, meta, store, s));
            }
        }
        let mut best: Option<NodeId> = None;
        if let Some(l1) = &self.levels[0] {
            let s = seed
                .filter(|&s| l1.contains(s) && !meta[s as usize].deleted)
                .or_else(|| Self::first_live(&l1.members, meta));
            if let Some(s) = s {
                best = Some(Self::greedy(l1, query, meta, store, s));
            }
        } else {
            best = seed;
        }
        let mut n = 0;
        if let Some(b) = best {
            out[n] = b;
            n += 1;
        }
        if let Some(f) = fallback {
            if n == 0 || out[0] != f {
                out[n] = f;
                n += 1;
            }
        }
        n
    }

    fn first_live(members: &[NodeId], meta: &[NodeMeta]) -> Option<NodeId> {
        members
            .iter()
            .copied()
            .find(|&id| !meta[id as usize].deleted)
    }

    fn greedy(
        level: &HierarchyLevel,
        query: &[f32],
        meta: &[NodeMeta],
        store: &VectorStore,
        seed: NodeId,
    ) -> NodeId {
        let mut cur = seed;
        let mut cur_d = store.distance_to(query, cur);
        loop {
            let mut best = cur;
            let mut best_d = cur_d;
            for &nb in level.neighbors(cur) {
                if meta[nb as usize].deleted {
                    continue;
                }
                let d = store.distance_to(query, nb);
                if d < best_d || (d == best_d && nb < best) {
                    best = nb;
                    best_d = d;
                }
            }
            if best == cur {
                return cur;
            }
            cur = best;
            cur_d = best_d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::StorageConfig;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn store_with(vs: &[Vec<f32>]) -> VectorStore {
        let mut s = VectorStore::new(
            vs[0].len(),
            StorageConfig {
                quantize: false,
                ..Default::default()
            },
        )
        .unwrap();
        for (i, v) in vs.iter().enumerate() {
            s.put_vector(i as NodeId, v).unwrap();
        }
        s
    }

    fn metas(counts: &[u32]) -> Vec<NodeMeta> {
        counts
            .iter()
            .map(|&c| NodeMeta {
                query_use_count: c,
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn member_count_is_ceil_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vs: Vec<Vec<f32>> = (0..1000)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let store = store_with(&vs);
        let meta = metas(&vec![0u32; 1000]);
        let level = Hierarchy::build_level(1, 0.02, 16, &meta, &store).unwrap();
        assert_eq!(level.members().len(), 20);
    }

    #[test]
    fn equal_traffic_ties_go_to_lowest_ids() {
        let vs: Vec<Vec<f32>> = (0..100).map(|i| vec![i as f32; 4]).collect();
        let store = store_with(&vs);
        let meta = metas(&vec![7u32; 100]);
        let level = Hierarchy::build_level(1, 0.05, 4, &meta, &store).unwrap();
        let mut members = level.members().to_vec();
        members.sort_unstable();
        assert_eq!(members, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn member_knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs: Vec<Vec<f32>> = (0..200)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let store = store_with(&vs);
        let mut counts = vec![0u32; 200];
        for (i, c) in counts.iter_mut().enumerate() {
            *c = (i % 17) as u32;
        }
        let meta = metas(&counts);
        let level = Hierarchy::build_level(1, 0.2, 5, &meta, &store).unwrap();
        for &m in level.members() {
            let mut expected: Vec<(f32, NodeId)> = level
                .members()
                .iter()
                .filter(|&&o| o != m)
                .map(|&o| (squared_l2(&vs[m as usize], &vs[o as usize]), o))
                .collect();
            expected.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expected: Vec<NodeId> = expected.iter().take(5).map(|&(_, o)| o).collect();
            assert_eq!(level.neighbors(m), expected.as_slice());
        }
    }

    #[test]
    fn small_levels_connect_all_to_all() {
        let vs: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32; 4]).collect();
        let store = store_with(&vs);
        let meta = metas(&vec![0u32; 10]);
        // ratio picks 3 members, k_level larger than membership
        let level = Hierarchy::build_level(2, 0.25, 32, &meta, &store).unwrap();
        assert_eq!(level.members().len(), 3);
        for &m in level.members() {
            assert_eq!(level.neighbors(m).len(), 2);
        }
    }

    #[test]
    fn refresh_counters() {
        let mut h = Hierarchy::new(RefreshPolicy::default());
        h.note_inserts(9_999);
        assert!(h.due_levels().is_none());
        h.note_inserts(1);
        assert_eq!(h.due_levels(), Some([true, false]));
        let mut h2 = Hierarchy::new(RefreshPolicy::default());
        h2.note_queries(5_000);
        assert_eq!(h2.due_levels(), Some([true, true]));
    }

    #[test]
    fn descend_empty_hierarchy_uses_fallback() {
        let vs: Vec<Vec<f32>> = (0..4).map(|i| vec![i as f32; 4]).collect();
        let store = store_with(&vs);
        let meta = metas(&[0, 0, 0, 0]);
        let h = Hierarchy::new(RefreshPolicy::default());
        let mut out = [0; 2];
        let n = h.descend(&[0.0; 4], &meta, &store, Some(2), &mut out);
        assert_eq!(n, 1);
        assert_eq!(out[0], 2);
    }

    #[test]
    fn descend_skips_deleted_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vs: Vec<Vec<f32>> = (0..100)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let store = store_with(&vs);
        let mut meta = metas(&vec![0u32; 100]);
        let h = Hierarchy::new(RefreshPolicy::default()).rebuilt([true, true], &meta, &store);
        // delete every member
        for (_, members) in h.level_indices() {
            for &m in members {
                meta[m as usize].deleted = true;
            }
        }
        let mut out = [0; 2];
        let n = h.descend(&[0.0; 4], &meta, &store, Some(99), &mut out);
        for &e in &out[..n] {
            assert!(!meta[e as usize].deleted);
        }
    }
}
