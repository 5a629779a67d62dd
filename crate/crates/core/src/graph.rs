// SPDX-License-Identifier: Apache-2.0

//! Adjacency-indexed view of a [`Database`]: nodes are constants, edges are facts.

use crate::data::{Database, Fact, FactId, NodeId, Terms};

/// Immutable adjacency index over a database's facts.
///
/// Each node keeps its unary facts and its incident binary facts in two
/// compressed lists sorted by fact id. A binary `p(a,b)` with `a != b` appears
/// in both `a`'s and `b`'s list; a self-loop `p(a,a)` appears once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataGraph {
    facts: Vec<Fact>,
    unary_offsets: Vec<usize>,
    unary_ids: Vec<FactId>,
    binary_offsets: Vec<usize>,
    binary_ids: Vec<FactId>,
    binary_edges: usize,
}

fn compress(lists: Vec<Vec<FactId>>) -> (Vec<usize>, Vec<FactId>) {
    let mut offsets = Vec::with_capacity(lists.len() + 1);
    let mut flat = Vec::with_capacity(lists.iter().map(Vec::len).sum());
    offsets.push(0);
    for list in lists {
        flat.extend(list);
        offsets.push(flat.len());
    }
    (offsets, flat)
}

impl DataGraph {
    pub fn build(db: &Database) -> Self {
        let n = db.num_constants();
        let mut unary: Vec<Vec<FactId>> = vec![Vec::new(); n];
        let mut binary: Vec<Vec<FactId>> = vec![Vec::new(); n];
        let mut binary_edges = 0;
        // Fact ids are visited in increasing order, so every list comes out sorted.
        for (id, fact) in db.facts().iter().enumerate() {
            let id = id as FactId;
            match fact.terms {
                Terms::Unary(a) => unary[a as usize].push(id),
                Terms::Binary(a, b) => {
                    binary_edges += 1;
                    binary[a as usize].push(id);
                    if a != b {
                        binary[b as usize].push(id);
                    }
                }
            }
        }
        let (unary_offsets, unary_ids) = compress(unary);
        let (binary_offsets, binary_ids) = compress(binary);
        DataGraph {
            facts: db.facts().to_vec(),
            unary_offsets,
            unary_ids,
            binary_offsets,
            binary_ids,
            binary_edges,
        }
    }

    pub fn node_count(&self) -> usize {
        self.unary_offsets.len() - 1
    }

    /// Number of edges (facts) of either arity.
    pub fn edge_count(&self) -> usize {
        self.facts.len()
    }

    pub fn binary_edge_count(&self) -> usize {
        self.binary_edges
    }

    pub fn unary_of(&self, v: NodeId) -> &[FactId] {
        let v = v as usize;
        &self.unary_ids[self.unary_offsets[v]..self.unary_offsets[v + 1]]
    }

    pub fn binary_of(&self, v: NodeId) -> &[FactId] {
        let v = v as usize;
        &self.binary_ids[self.binary_offsets[v]..self.binary_offsets[v + 1]]
    }

    pub fn fact(&self, id: FactId) -> Fact {
        self.facts[id as usize]
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    /// The endpoint of binary fact `id` opposite to `v` (or `v` itself for a loop).
    pub fn other_end(&self, id: FactId, v: NodeId) -> NodeId {
        match self.facts[id as usize].terms {
            Terms::Binary(a, b) if a == v => b,
            Terms::Binary(a, _) => a,
            Terms::Unary(a) => a,
        }
    }
}
