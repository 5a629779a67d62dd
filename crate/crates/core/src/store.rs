// SPDX-License-Identifier: Apache-2.0

//! Ground patterns grouped by the canonical key of their variable pattern.

use std::collections::BTreeMap;
use std::io::Write;

use rustc_hash::{FxHashMap, FxHashSet};
use smallvec::SmallVec;

use crate::data::{FactId, SymbolTable};
use crate::graph::DataGraph;
use crate::pattern::{canonical_form, Pattern, PatternKey, SymmetryMode, Var};
use crate::error::PatternError;

/// A set of facts, stored as sorted distinct fact ids.
pub type GroundPattern = SmallVec<[FactId; 8]>;

/// `g ∪ {id}`, keeping the ids sorted. Returns `None` if `id` is already in `g`.
pub fn graft(g: &GroundPattern, id: FactId) -> Option<GroundPattern> {
    match g.binary_search(&id) {
        Ok(_) => None,
        Err(pos) => {
            let mut out = GroundPattern::with_capacity(g.len() + 1);
            out.extend_from_slice(&g[..pos]);
            out.push(id);
            out.extend_from_slice(&g[pos..]);
            Some(out)
        }
    }
}

/// The variable pattern of a ground pattern, slots numbered by first
/// appearance in fact-id order.
pub fn pattern_of(graph: &DataGraph, g: &[FactId]) -> Pattern {
    let facts: Vec<_> = g.iter().map(|&id| graph.fact(id)).collect();
    Pattern::from_facts(&facts).0
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternEntry {
    /// A representative pattern in canonical slot order.
    pub exemplar: Pattern,
    /// Sorted, duplicate-free groundings.
    pub groundings: Vec<GroundPattern>,
}

impl PatternEntry {
    pub fn count(&self) -> usize {
        self.groundings.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternStore {
    mode: SymmetryMode,
    node_cap: usize,
    entries: BTreeMap<PatternKey, PatternEntry>,
}

impl PatternStore {
    pub fn empty(mode: SymmetryMode, node_cap: usize) -> Self {
        PatternStore { mode, node_cap, entries: BTreeMap::new() }
    }

    /// Groups ground patterns by canonical key. Duplicates are collapsed.
    pub fn from_ground_patterns(
        graph: &DataGraph,
        ground: impl IntoIterator<Item = GroundPattern>,
        mode: SymmetryMode,
        node_cap: usize,
    ) -> Result<Self, PatternError> {
        let mut all: Vec<GroundPattern> = ground.into_iter().filter(|g| !g.is_empty()).collect();
        all.sort_unstable();
        all.dedup();
        let mut memo: FxHashMap<Pattern, (PatternKey, Vec<Var>)> = FxHashMap::default();
        let mut entries: BTreeMap<PatternKey, PatternEntry> = BTreeMap::new();
        for g in all {
            let raw = pattern_of(graph, &g);
            let (key, perm) = match memo.get(&raw) {
                Some(hit) => hit.clone(),
                None => {
                    let form = canonical_form(&raw, mode, node_cap)?;
                    memo.insert(raw.clone(), (form.key.clone(), form.perm.clone()));
                    (form.key, form.perm)
                }
            };
            // Ground patterns arrive sorted, so the first one seen per key is the smallest.
            entries
                .entry(key)
                .or_insert_with(|| PatternEntry { exemplar: raw.relabel(&perm), groundings: Vec::new() })
                .groundings
                .push(g);
        }
        Ok(PatternStore { mode, node_cap, entries })
    }

    pub fn mode(&self) -> SymmetryMode {
        self.mode
    }

    pub fn node_cap(&self) -> usize {
        self.node_cap
    }

    /// Number of distinct pattern keys.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &PatternKey) -> Option<&PatternEntry> {
        self.entries.get(key)
    }

    pub fn count(&self, key: &PatternKey) -> usize {
        self.entries.get(key).map_or(0, PatternEntry::count)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PatternKey, &PatternEntry)> {
        self.entries.iter()
    }

    pub fn total_groundings(&self) -> usize {
        self.entries.values().map(PatternEntry::count).sum()
    }

    /// Every stored ground pattern, across keys.
    pub fn ground_set(&self) -> FxHashSet<GroundPattern> {
        self.entries.values().flat_map(|e| e.groundings.iter().cloned()).collect()
    }

    /// One line per key, `pattern TAB count`, sorted by count descending then text.
    pub fn dump_lines(&self, names: &SymbolTable) -> Vec<String> {
        let mut rows: Vec<(usize, String)> =
            self.entries.values().map(|e| (e.count(), e.exemplar.render(names))).collect();
        rows.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        rows.into_iter().map(|(c, t)| format!("{t}\t{c}")).collect()
    }

    pub fn write_dump<W: Write>(&self, names: &SymbolTable, mut out: W) -> std::io::Result<()> {
        for line in self.dump_lines(names) {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Database;
    use smallvec::smallvec;

    #[test]
    fn graft_keeps_order() {
        let g: GroundPattern = smallvec![1, 5];
        assert_eq!(graft(&g, 3).unwrap().as_slice(), &[1, 3, 5]);
        assert!(graft(&g, 5).is_none());
    }

    #[test]
    fn groups_isomorphic_groundings() {
        let mut db = Database::new();
        db.add("likes", &["a", "s"]).unwrap();
        db.add("friends", &["a", "b"]).unwrap();
        db.add("likes", &["b", "s"]).unwrap();
        let g = DataGraph::build(&db);
        let ground: Vec<GroundPattern> = vec![smallvec![0], smallvec![2], smallvec![0, 1], smallvec![1, 2], smallvec![0]];
        let un = PatternStore::from_ground_patterns(&g, ground.clone(), SymmetryMode::Unordered, 8).unwrap();
        assert_eq!(un.len(), 2);
        assert_eq!(un.total_groundings(), 4);
        let ord = PatternStore::from_ground_patterns(&g, ground, SymmetryMode::Ordered, 8).unwrap();
        assert_eq!(ord.len(), 3);
        assert_eq!(
            un.dump_lines(db.predicates()),
            vec!["friends(V0,V2) & likes(V0,V1)\t2".to_string(), "likes(V0,V1)\t2".to_string()]
        );
    }
}
