// SPDX-License-Identifier: Apache-2.0

//! Rule and theory scoring.
//!
//! Precision is the fraction of body groundings that extend to rule
//! groundings, corrected by the symmetry factor and divided by the head
//! predicate's base rate. Recall sums `ln(1 + d)` over the facts a rule's
//! groundings entail, `d` being the number of groundings entailing each one.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rustc_hash::FxHashMap;

use crate::data::{Arity, Database, Fact, FactId, NodeId, PredId, Terms};
use crate::error::UtilityError;
use crate::graph::DataGraph;
use crate::pattern::{canonical_key, Args, Atom, SymmetryMode};
use crate::rule::{symmetry_factor, Rule};
use crate::store::PatternStore;

/// Which predicates compete with the head predicate in the prior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    /// Same arity and head shape, and the same inferred type at every
    /// argument position. Types are the classes of argument positions
    /// linked by sharing a constant.
    #[default]
    Typed,
    /// Same arity and head shape only.
    Arity,
}

impl std::str::FromStr for PriorFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "typed" => Ok(PriorFamily::Typed),
            "arity" => Ok(PriorFamily::Arity),
            other => Err(format!("unknown prior family `{other}`")),
        }
    }
}

/// Root of the geometric mean of rule complexities within a head group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityExponent {
    /// `1 / |group|`.
    #[default]
    GroupSize,
    /// `1 / |theory|`.
    TheorySize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum HeadShape {
    Unary,
    BinaryDistinct,
    BinaryLoop,
}

/// Head atom up to variable renaming: the grouping key for theory utility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct HeadKey {
    pub pred: PredId,
    pub shape: HeadShape,
}

impl HeadKey {
    pub fn of(atom: &Atom) -> Self {
        let shape = match atom.args {
            Args::One(_) => HeadShape::Unary,
            Args::Two(a, b) if a == b => HeadShape::BinaryLoop,
            Args::Two(..) => HeadShape::BinaryDistinct,
        };
        HeadKey { pred: atom.pred, shape }
    }
}

fn fact_shape(f: &Fact) -> HeadShape {
    match f.terms {
        Terms::Unary(_) => HeadShape::Unary,
        Terms::Binary(a, b) if a == b => HeadShape::BinaryLoop,
        Terms::Binary(..) => HeadShape::BinaryDistinct,
    }
}

/// Per-predicate fact counts by shape and argument-position types, for priors.
#[derive(Clone, Debug)]
pub struct PriorTable {
    family: PriorFamily,
    arity: Vec<Arity>,
    counts: Vec<[u64; 3]>,
    types: Vec<[usize; 2]>,
}

fn shape_index(s: HeadShape) -> usize {
    match s {
        HeadShape::Unary => 0,
        HeadShape::BinaryDistinct => 1,
        HeadShape::BinaryLoop => 2,
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl PriorTable {
    pub fn new(db: &Database, family: PriorFamily) -> Self {
        let n = db.num_predicates();
        let mut counts = vec![[0u64; 3]; n];
        // Union-find over argument positions `2 * pred + k`.
        let mut parent: Vec<usize> = (0..2 * n).collect();
        let mut first_seen: Vec<Option<usize>> = vec![None; db.num_constants()];
        let mut link = |parent: &mut Vec<usize>, node: NodeId, position: usize| match first_seen[node as usize] {
            None => first_seen[node as usize] = Some(position),
            Some(other) => {
                let (a, b) = (find(parent, other), find(parent, position));
                parent[a.max(b)] = a.min(b);
            }
        };
        for f in db.facts() {
            counts[f.pred as usize][shape_index(fact_shape(f))] += 1;
            let base = 2 * f.pred as usize;
            match f.terms {
                Terms::Unary(a) => link(&mut parent, a, base),
                Terms::Binary(a, b) => {
                    link(&mut parent, a, base);
                    link(&mut parent, b, base + 1);
                }
            }
        }
        let types = (0..n).map(|p| [find(&mut parent, 2 * p), find(&mut parent, 2 * p + 1)]).collect();
        let arity = (0..n as PredId).map(|p| db.arity(p)).collect();
        PriorTable { family, arity, counts, types }
    }

    pub fn family(&self) -> PriorFamily {
        self.family
    }

    fn compatible(&self, p: PredId, q: PredId) -> bool {
        if p == q {
            return true;
        }
        match self.family {
            PriorFamily::Arity => true,
            PriorFamily::Typed => {
                let positions = self.arity[p as usize].as_usize();
                (0..positions).all(|k| self.types[p as usize][k] == self.types[q as usize][k])
            }
        }
    }

    /// Facts of the head predicate over facts of all competing predicates,
    /// counting only facts of the head's shape. `None` if the head
    /// predicate has no fact of that shape.
    pub fn prior(&self, head: HeadKey) -> Option<Ratio<u64>> {
        let s = shape_index(head.shape);
        let own = self.counts.get(head.pred as usize)?[s];
        if own == 0 {
            return None;
        }
        let arity = self.arity[head.pred as usize];
        let total: u64 = (0..self.counts.len() as PredId)
            .filter(|&q| self.arity[q as usize] == arity && self.compatible(head.pred, q))
            .map(|q| self.counts[q as usize][s])
            .sum();
        Some(Ratio::new(own, total))
    }
}

pub fn bayesian_prior(rule: &Rule, table: &PriorTable) -> Option<Ratio<u64>> {
    table.prior(HeadKey::of(&rule.head()))
}

/// Grounding counts of the rule pattern and of the body pattern.
pub fn grounding_counts(rule: &Rule, store: &PatternStore) -> Result<(u64, u64), UtilityError> {
    let (mode, cap) = (store.mode(), store.node_cap());
    let rule_count = store.count(&canonical_key(rule.pattern(), mode, cap)?) as u64;
    let body_count = store.count(&canonical_key(&rule.body(), mode, cap)?) as u64;
    Ok((rule_count, body_count))
}

pub fn precision(rule: &Rule, store: &PatternStore) -> Result<Ratio<u64>, UtilityError> {
    let (rule_count, body_count) = grounding_counts(rule, store)?;
    if body_count == 0 {
        return Err(UtilityError::UndefinedPrecision);
    }
    Ok(Ratio::new(rule_count, body_count))
}

/// Calls `visit(assignment)` for every bijection from the pattern's atoms
/// onto `facts` that respects predicates and maps slots injectively;
/// `assignment[i]` is the index in `facts` of the fact matched by atom `i`.
pub(crate) fn for_each_embedding(atoms: &[Atom], facts: &[Fact], mode: SymmetryMode, mut visit: impl FnMut(&[usize])) {
    #[allow(clippy::too_many_arguments)]
    fn go(
        atoms: &[Atom],
        facts: &[Fact],
        mode: SymmetryMode,
        i: usize,
        slots: &mut Vec<Option<NodeId>>,
        used: &mut Vec<bool>,
        chosen: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if i == atoms.len() {
            visit(chosen);
            return;
        }
        let atom = atoms[i];
        for j in 0..facts.len() {
            if used[j] || facts[j].pred != atom.pred {
                continue;
            }
            let orientations: Vec<Vec<(u8, NodeId)>> = match (atom.args, facts[j].terms) {
                (Args::One(a), Terms::Unary(x)) => vec![vec![(a, x)]],
                (Args::Two(a, b), Terms::Binary(x, y)) => {
                    let mut o = vec![vec![(a, x), (b, y)]];
                    if mode == SymmetryMode::Unordered && x != y {
                        o.push(vec![(a, y), (b, x)]);
                    }
                    o
                }
                _ => continue,
            };
            for bind in orientations {
                let mut newly = Vec::new();
                let mut ok = true;
                for &(slot, node) in &bind {
                    match slots[slot as usize] {
                        Some(n) if n == node => {}
                        Some(_) => ok = false,
                        None => {
                            if slots.contains(&Some(node)) {
                                ok = false;
                            } else {
                                slots[slot as usize] = Some(node);
                                newly.push(slot);
                            }
                        }
                    }
                    if !ok {
                        break;
                    }
                }
                if ok {
                    used[j] = true;
                    chosen.push(j);
                    go(atoms, facts, mode, i + 1, slots, used, chosen, visit);
                    chosen.pop();
                    used[j] = false;
                }
                for slot in newly {
                    slots[slot as usize] = None;
                }
            }
        }
    }
    let vars = atoms.iter().flat_map(|a| a.args.vars()).max().map_or(0, |v| v as usize + 1);
    go(atoms, facts, mode, 0, &mut vec![None; vars], &mut vec![false; facts.len()], &mut Vec::new(), &mut visit);
}

/// For each fact entailed by the rule, the number of rule groundings whose
/// head can be mapped onto it, sorted by fact id.
pub fn recall_degrees(rule: &Rule, store: &PatternStore, graph: &DataGraph) -> Result<Vec<(FactId, u32)>, UtilityError> {
    let key = canonical_key(rule.pattern(), store.mode(), store.node_cap())?;
    let Some(entry) = store.get(&key) else {
        return Ok(Vec::new());
    };
    let head = rule.head_index();
    let mut degrees: FxHashMap<FactId, u32> = FxHashMap::default();
    let mut heads: Vec<FactId> = Vec::new();
    for g in &entry.groundings {
        let facts: Vec<Fact> = g.iter().map(|&id| graph.fact(id)).collect();
        heads.clear();
        for_each_embedding(rule.pattern().atoms(), &facts, store.mode(), |chosen| heads.push(g[chosen[head]]));
        heads.sort_unstable();
        heads.dedup();
        for &f in &heads {
            *degrees.entry(f).or_default() += 1;
        }
    }
    let mut out: Vec<(FactId, u32)> = degrees.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

pub fn recall_from_degrees(degrees: &[(FactId, u32)]) -> f64 {
    degrees.iter().map(|&(_, d)| (d as f64).ln_1p()).sum()
}

pub fn complexity(length: usize) -> f64 {
    (-(length as f64)).exp()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RuleStats {
    pub head: HeadKey,
    pub length: usize,
    pub body_count: u64,
    pub rule_count: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub precision: Ratio<u64>,
    pub symmetry: u32,
    #[serde(serialize_with = "ser_ratio")]
    pub prior: Ratio<u64>,
    pub recall: f64,
    pub complexity: f64,
    pub utility: f64,
    #[serde(skip)]
    pub degrees: Vec<(FactId, u32)>,
}

fn ser_ratio<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

pub fn ratio_f64(r: &Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl RuleStats {
    /// `P * S / B` as a float.
    pub fn corrected_precision(&self) -> f64 {
        ratio_f64(&self.precision) * self.symmetry as f64 / ratio_f64(&self.prior)
    }

    /// Exact test of `P * S / B > 1`.
    pub fn beats_prior(&self) -> bool {
        let (pn, pd) = (*self.precision.numer() as u128, *self.precision.denom() as u128);
        let (bn, bd) = (*self.prior.numer() as u128, *self.prior.denom() as u128);
        pn * self.symmetry as u128 * bd > pd * bn
    }
}

pub fn rule_utility(stats: &RuleStats) -> f64 {
    stats.corrected_precision() * stats.recall * stats.complexity
}

/// All statistics of one rule against a mined store.
pub fn rule_stats(
    rule: &Rule,
    store: &PatternStore,
    graph: &DataGraph,
    priors: &PriorTable,
) -> Result<RuleStats, UtilityError> {
    let (rule_count, body_count) = grounding_counts(rule, store)?;
    if body_count == 0 {
        return Err(UtilityError::UndefinedPrecision);
    }
    let prior = bayesian_prior(rule, priors).ok_or(UtilityError::MissingRulePattern)?;
    let degrees = recall_degrees(rule, store, graph)?;
    let mut stats = RuleStats {
        head: HeadKey::of(&rule.head()),
        length: rule.len(),
        body_count,
        rule_count,
        precision: Ratio::new(rule_count, body_count),
        symmetry: symmetry_factor(rule, store.mode()),
        prior,
        recall: recall_from_degrees(&degrees),
        complexity: complexity(rule.len()),
        utility: 0.0,
        degrees,
    };
    stats.utility = rule_utility(&stats);
    Ok(stats)
}

#[derive(Clone, Debug, Default)]
struct Group {
    rules: usize,
    corrected: f64,
    log_complexity: f64,
    degrees: FxHashMap<FactId, u64>,
    recall: f64,
}

impl Group {
    fn value(&self, exponent_base: usize) -> f64 {
        if self.rules == 0 {
            return 0.0;
        }
        self.corrected * self.recall * (self.log_complexity / exponent_base as f64).exp()
    }

    /// Recall after merging `degrees` into this group.
    fn recall_with(&self, degrees: &[(FactId, u32)]) -> f64 {
        let mut r = self.recall;
        for &(f, d) in degrees {
            let old = self.degrees.get(&f).copied().unwrap_or(0);
            r += ((old + d as u64) as f64).ln_1p() - (old as f64).ln_1p();
        }
        r
    }
}

/// Theory utility maintained rule by rule.
#[derive(Clone, Debug, Default)]
pub struct TheoryAccumulator {
    exponent: ComplexityExponent,
    groups: BTreeMap<HeadKey, Group>,
    size: usize,
}

impl TheoryAccumulator {
    pub fn new(exponent: ComplexityExponent) -> Self {
        TheoryAccumulator { exponent, groups: BTreeMap::new(), size: 0 }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    fn base(&self, group_rules: usize, theory_rules: usize) -> usize {
        match self.exponent {
            ComplexityExponent::GroupSize => group_rules,
            ComplexityExponent::TheorySize => theory_rules,
        }
    }

    pub fn utility(&self) -> f64 {
        self.groups.values().map(|g| g.value(self.base(g.rules, self.size))).sum()
    }

    /// Theory utility if `stats` were added, without modifying `self`.
    pub fn utility_with(&self, stats: &RuleStats) -> f64 {
        let size = self.size + 1;
        let empty = Group::default();
        let current = self.groups.get(&stats.head).unwrap_or(&empty);
        let candidate = Group {
            rules: current.rules + 1,
            corrected: current.corrected + stats.corrected_precision(),
            log_complexity: current.log_complexity + stats.complexity.ln(),
            degrees: FxHashMap::default(),
            recall: current.recall_with(&stats.degrees),
        };
        match self.exponent {
            ComplexityExponent::GroupSize => {
                self.utility() - current.value(current.rules) + candidate.value(candidate.rules)
            }
            ComplexityExponent::TheorySize => {
                let others: f64 =
                    self.groups.iter().filter(|(k, _)| **k != stats.head).map(|(_, g)| g.value(size)).sum();
                others + candidate.value(size)
            }
        }
    }

    pub fn add(&mut self, stats: &RuleStats) {
        self.size += 1;
        let g = self.groups.entry(stats.head).or_default();
        g.recall = g.recall_with(&stats.degrees);
        for &(f, d) in &stats.degrees {
            *g.degrees.entry(f).or_default() += d as u64;
        }
        g.rules += 1;
        g.corrected += stats.corrected_precision();
        g.log_complexity += stats.complexity.ln();
    }
}

/// Utility of a set of rules, computed from scratch.
pub fn theory_utility<'a>(rules: impl IntoIterator<Item = &'a RuleStats>, exponent: ComplexityExponent) -> f64 {
    let mut acc = TheoryAccumulator::new(exponent);
    for r in rules {
        acc.add(r);
    }
    acc.utility()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::{mine_patterns, MinerConfig};
    use crate::rule::parse_rule;

    fn toy() -> Database {
        let mut db = Database::new();
        db.add("likes", &["a", "s"]).unwrap();
        db.add("friends", &["a", "b"]).unwrap();
        db.add("likes", &["b", "s"]).unwrap();
        db
    }

    fn stats_for(db: &Database, text: &str, mode: SymmetryMode) -> RuleStats {
        let g = DataGraph::build(db);
        let store = mine_patterns(&g, &MinerConfig { depth: 3, paths: 10, mode, ..MinerConfig::default() }).unwrap();
        let rule = parse_rule(text, db).unwrap();
        rule_stats(&rule, &store, &g, &PriorTable::new(db, PriorFamily::Typed)).unwrap()
    }

    #[test]
    fn toy_corrected_precision_is_one_in_both_modes() {
        let db = toy();
        let r1 = "likes(U1,I) & friends(U1,U2) -> likes(U2,I)";
        let un = stats_for(&db, r1, SymmetryMode::Unordered);
        assert_eq!(un.precision, Ratio::new(1, 2));
        assert_eq!(un.symmetry, 2);
        let ord = stats_for(&db, r1, SymmetryMode::Ordered);
        assert_eq!(ord.precision, Ratio::new(1, 1));
        assert_eq!(ord.symmetry, 1);
        for s in [un, ord] {
            assert_eq!(s.precision * Ratio::from_integer(s.symmetry as u64), Ratio::from_integer(1));
        }
    }

    #[test]
    fn prior_examples() {
        let mut db = Database::new();
        db.add("e", &["a", "b"]).unwrap();
        db.add("e", &["b", "c"]).unwrap();
        let t = PriorTable::new(&db, PriorFamily::Arity);
        assert_eq!(t.prior(HeadKey { pred: 0, shape: HeadShape::BinaryDistinct }), Some(Ratio::from_integer(1)));
        assert_eq!(t.prior(HeadKey { pred: 0, shape: HeadShape::BinaryLoop }), None);
        // Typed family leaves out predicates over unrelated constants.
        db.add("f", &["x", "y"]).unwrap();
        let typed = PriorTable::new(&db, PriorFamily::Typed);
        let arity = PriorTable::new(&db, PriorFamily::Arity);
        let head = HeadKey { pred: 0, shape: HeadShape::BinaryDistinct };
        assert_eq!(typed.prior(head), Some(Ratio::from_integer(1)));
        assert_eq!(arity.prior(head), Some(Ratio::new(2, 3)));
    }

    #[test]
    fn typed_family_follows_shared_constants() {
        let mut db = Database::new();
        db.add("friends", &["u1", "u2"]).unwrap();
        db.add("likes", &["u1", "i1"]).unwrap();
        db.add("likes", &["u2", "i2"]).unwrap();
        for k in 0..10 {
            db.add("dislikes", &["u2", &format!("j{k}")]).unwrap();
        }
        db.add("dislikes", &["u3", "i1"]).unwrap();
        let t = PriorTable::new(&db, PriorFamily::Typed);
        let key = |name| HeadKey { pred: db.predicate_id(name).unwrap(), shape: HeadShape::BinaryDistinct };
        // friends is user x user, so it is not in the family of likes.
        assert_eq!(t.prior(key("likes")), Some(Ratio::new(2, 13)));
        assert_eq!(t.prior(key("dislikes")), Some(Ratio::new(11, 13)));
        assert_eq!(t.prior(key("friends")), Some(Ratio::from_integer(1)));
        // Disjoint category labels on one kind of node share a type.
        let mut cats = Database::new();
        cats.add("cat@a", &["p1"]).unwrap();
        cats.add("cat@b", &["p2"]).unwrap();
        cats.add("cat@b", &["p3"]).unwrap();
        cats.add("link", &["p1", "p2"]).unwrap();
        cats.add("link", &["p2", "p3"]).unwrap();
        let t = PriorTable::new(&cats, PriorFamily::Typed);
        let unary = |name| HeadKey { pred: cats.predicate_id(name).unwrap(), shape: HeadShape::Unary };
        assert_eq!(t.prior(unary("cat@a")), Some(Ratio::new(1, 3)));
    }

    #[test]
    fn symmetric_rule_recall_degrees() {
        let mut db = Database::new();
        db.add("p", &["a", "b"]).unwrap();
        db.add("p", &["b", "a"]).unwrap();
        let g = DataGraph::build(&db);
        for mode in [SymmetryMode::Ordered, SymmetryMode::Unordered] {
            let store = mine_patterns(&g, &MinerConfig { depth: 2, paths: 4, mode, ..MinerConfig::default() }).unwrap();
            let rule = parse_rule("p(X,Y) -> p(Y,X)", &db).unwrap();
            assert_eq!(recall_degrees(&rule, &store, &g).unwrap(), vec![(0, 1), (1, 1)]);
        }
    }

    #[test]
    fn utility_arithmetic() {
        let stats = RuleStats {
            head: HeadKey { pred: 0, shape: HeadShape::BinaryDistinct },
            length: 3,
            body_count: 2,
            rule_count: 1,
            precision: Ratio::new(1, 2),
            symmetry: 2,
            prior: Ratio::new(1, 11),
            recall: 2f64.ln(),
            complexity: complexity(3),
            utility: 0.0,
            degrees: vec![(0, 1)],
        };
        let u = rule_utility(&stats);
        assert!((u - 11.0 * 2f64.ln() * (-3f64).exp()).abs() < 1e-12);
        assert!((u - 0.3796).abs() < 5e-5);
        assert!(stats.beats_prior());
        let zero = RuleStats { recall: 0.0, ..stats.clone() };
        assert_eq!(rule_utility(&zero), 0.0);
        // A singleton theory scores like the rule on its own.
        let single = RuleStats { utility: u, ..stats };
        assert!((theory_utility([&single], ComplexityExponent::GroupSize) - u).abs() < 1e-12);
    }

    #[test]
    fn log_recall_prefers_spread() {
        assert!((recall_from_degrees(&[(0, 2)]) - 3f64.ln()).abs() < 1e-12);
        assert!(recall_from_degrees(&[(0, 1), (1, 1)]) > recall_from_degrees(&[(0, 2)]));
    }

    #[test]
    fn undefined_precision_without_body() {
        let db = toy();
        let g = DataGraph::build(&db);
        let store = PatternStore::empty(SymmetryMode::Unordered, 8);
        let rule = parse_rule("likes(X,Y) -> friends(X,Y)", &db).unwrap();
        assert_eq!(precision(&rule, &store), Err(UtilityError::UndefinedPrecision));
        let _ = g;
    }
}
