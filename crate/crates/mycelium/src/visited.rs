//! Reusable visited-node trackers for beam search.
//!
//! The dense tracker keeps one epoch mark per node so a logical reset is a
//! single counter bump; a full physical clear only happens when the epoch
//! counter wraps. A hash-set tracker with identical semantics exists for
//! equivalence testing.

use crate::NodeId;
use std::collections::HashSet;

pub trait VisitedTracker {
    /// Mark `id` visited; returns true if it was already marked.
    fn visit(&mut self, id: NodeId) -> bool;
    fn contains(&self, id: NodeId) -> bool;
    /// Logical reset; after this no id is marked.
    fn reset(&mut self);
    /// Grow to track at least `capacity` nodes.
    fn grow(&mut self, capacity: usize);
}

/// Dense epoch-marked tracker. One byte per node, O(1) reset.
#[derive(Debug, Default)]
pub struct DenseVisited {
    marks: Vec<u8>,
    generation: u8,
}

impl DenseVisited {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            marks: vec![0; capacity],
            generation: 1,
        }
    }
}

impl VisitedTracker for DenseVisited {
    #[inline]
    fn visit(&mut self, id: NodeId) -> bool {
        let slot = &mut self.marks[id as usize];
        let seen = *slot == self.generation;
        *slot = self.generation;
        seen
    }

    #[inline]
    fn contains(&self, id: NodeId) -> bool {
        self.marks[id as usize] == self.generation
    }

    fn reset(&mut self) {
        if self.generation == u8::MAX {
            // wrap: stale marks from 255 generations ago would alias
            self.marks.fill(0);
            self.generation = 1;
        } else {
            self.generation += 1;
        }
    }

    fn grow(&mut self, capacity: usize) {
        if self.marks.len() < capacity {
            self.marks.resize(capacity, 0);
        }
    }
}

/// Associative-set tracker, used as the reference implementation in tests.
#[derive(Debug, Default)]
pub struct HashVisited {
    set: HashSet<NodeId>,
}

impl VisitedTracker for HashVisited {
    fn visit(&mut self, id: NodeId) -> bool {
        !self.set.insert(id)
    }

    fn contains(&self, id: NodeId) -> bool {
        self.set.contains(&id)
    }

    fn reset(&mut self) {
        self.set.clear();
    }

    fn grow(&mut self, _capacity: usize) {}
}
