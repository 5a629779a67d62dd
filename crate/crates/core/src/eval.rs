// SPDX-License-Identifier: Apache-2.0

//! Knowledge-graph-completion evaluation of a weighted theory.
//!
//! Body matching is injective (distinct variables take distinct constants),
//! the same reading used when counting groundings during learning.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::data::{Database, Fact, NodeId, PredId, RawFact, Terms};
use crate::error::EvalError;
use crate::format::WeightedRule;
use crate::graph::DataGraph;
use crate::pattern::{Args, Atom, SymmetryMode, Var};
use crate::rule::Rule;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Tail,
    Head,
    #[default]
    Both,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tail" => Ok(Direction::Tail),
            "head" => Ok(Direction::Head),
            "both" => Ok(Direction::Both),
            other => Err(format!("unknown direction `{other}` (expected tail, head or both)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EvalConfig {
    pub hits: Vec<usize>,
    pub direction: Direction,
    pub filtered: bool,
    /// Orientation convention the theory was learned under.
    pub mode: SymmetryMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { hits: vec![1, 3, 10], direction: Direction::Both, filtered: true, mode: SymmetryMode::Unordered }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.hits.is_empty() {
            return Err(EvalError::Config("at least one Hit@K value is required".into()));
        }
        if self.hits.contains(&0) {
            return Err(EvalError::Config("Hit@K values must be at least 1".into()));
        }
        Ok(())
    }
}

struct Matcher<'a> {
    atoms: Vec<Atom>,
    graph: &'a DataGraph,
    mode: SymmetryMode,
    assign: Vec<Option<NodeId>>,
    done: Vec<bool>,
}

impl Matcher<'_> {
    fn used(&self, v: NodeId) -> bool {
        self.assign.contains(&Some(v))
    }

    fn fits(&self, args: Args, fact: &Fact) -> bool {
        let get = |s: Var| self.assign[s as usize];
        match (args, fact.terms) {
            (Args::One(a), Terms::Unary(x)) => get(a) == Some(x),
            (Args::Two(a, b), Terms::Binary(x, y)) => {
                (get(a) == Some(x) && get(b) == Some(y))
                    || (self.mode == SymmetryMode::Unordered && get(a) == Some(y) && get(b) == Some(x))
            }
            _ => false,
        }
    }

    fn exists(&self, atom: Atom) -> bool {
        let anchor = atom.args.vars().next().and_then(|s| self.assign[s as usize]).expect("bound atom");
        let list = if atom.is_unary() { self.graph.unary_of(anchor) } else { self.graph.binary_of(anchor) };
        list.iter().any(|&id| {
            let f = self.graph.fact(id);
            f.pred == atom.pred && self.fits(atom.args, &f)
        })
    }

    /// Values the unbound slots of `atom` may take, as (slot, value) lists.
    fn extensions(&self, atom: Atom) -> Vec<Vec<(Var, NodeId)>> {
        let get = |s: Var| self.assign[s as usize];
        let mut out: Vec<Vec<(Var, NodeId)>> = Vec::new();
        match atom.args {
            Args::One(a) => {
                for f in self.graph.facts() {
                    if let (true, Terms::Unary(x)) = (f.pred == atom.pred, f.terms) {
                        out.push(vec![(a, x)]);
                    }
                }
            }
            Args::Two(a, b) if a == b => {
                for f in self.graph.facts() {
                    if let (true, Terms::Binary(x, y)) = (f.pred == atom.pred, f.terms) {
                        if x == y {
                            out.push(vec![(a, x)]);
                        }
                    }
                }
            }
            Args::Two(a, b) => match (get(a), get(b)) {
                (Some(v), None) | (None, Some(v)) => {
                    let (free, bound_first) = if get(a).is_some() { (b, true) } else { (a, false) };
                    for &id in self.graph.binary_of(v) {
                        let f = self.graph.fact(id);
                        if f.pred != atom.pred {
                            continue;
                        }
                        let Terms::Binary(x, y) = f.terms else { continue };
                        let any = self.mode == SymmetryMode::Unordered;
                        if x == v && (bound_first || any) {
                            out.push(vec![(free, y)]);
                        }
                        if y == v && (!bound_first || any) {
                            out.push(vec![(free, x)]);
                        }
                    }
                }
                (None, None) => {
                    for f in self.graph.facts() {
                        if let (true, Terms::Binary(x, y)) = (f.pred == atom.pred, f.terms) {
                            out.push(vec![(a, x), (b, y)]);
                            if self.mode == SymmetryMode::Unordered {
                                out.push(vec![(a, y), (b, x)]);
                            }
                        }
                    }
                }
                (Some(_), Some(_)) => unreachable!("fully bound atoms are checked, not extended"),
            },
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Depth-first search over the body; `visit` returns false to stop.
    fn search(&mut self, remaining: usize, visit: &mut dyn FnMut(&[Option<NodeId>]) -> bool) -> bool {
        if remaining == 0 {
            return visit(&self.assign);
        }
        let bound = |m: &Self, atom: &Atom| atom.args.vars().filter(|s| m.assign[*s as usize].is_some()).count();
        let unbound = |m: &Self, atom: &Atom| atom.args.vars().any(|s| m.assign[s as usize].is_none());
        let mut pick = None;
        for (i, atom) in self.atoms.iter().enumerate() {
            if self.done[i] {
                continue;
            }
            let rank = (!unbound(self, atom), bound(self, atom));
            if pick.is_none_or(|(_, best)| rank > best) {
                pick = Some((i, rank));
            }
        }
        let (i, _) = pick.expect("an unfinished atom");
        let atom = self.atoms[i];
        self.done[i] = true;
        let keep_going = if !unbound(self, &atom) {
            !self.exists(atom) || self.search(remaining - 1, visit)
        } else {
            let mut go = true;
            for ext in self.extensions(atom) {
                let distinct = ext.len() < 2 || ext[0].1 != ext[1].1;
                if !distinct || ext.iter().any(|&(_, v)| self.used(v)) {
                    continue;
                }
                for &(s, v) in &ext {
                    self.assign[s as usize] = Some(v);
                }
                go = self.search(remaining - 1, visit);
                for &(s, _) in &ext {
                    self.assign[s as usize] = None;
                }
                if !go {
                    break;
                }
            }
            go
        };
        self.done[i] = false;
        keep_going
    }
}

fn matcher<'a>(rule: &Rule, graph: &'a DataGraph, binding: &[Option<NodeId>], mode: SymmetryMode) -> Option<Matcher<'a>> {
    let n = rule.pattern().var_count();
    let mut assign = vec![None; n];
    for (slot, value) in binding.iter().enumerate().take(n) {
        if let Some(v) = *value {
            if v as usize >= graph.node_count() || assign.contains(&Some(v)) {
                return None;
            }
            assign[slot] = Some(v);
        }
    }
    let atoms: Vec<Atom> = rule.body_atoms().copied().collect();
    let done = vec![false; atoms.len()];
    Some(Matcher { atoms, graph, mode, assign, done })
}

/// Does the body have a grounding consistent with `binding` (indexed by slot)?
pub fn match_body(rule: &Rule, graph: &DataGraph, binding: &[Option<NodeId>], mode: SymmetryMode) -> bool {
    let Some(mut m) = matcher(rule, graph, binding, mode) else { return false };
    let n = m.atoms.len();
    let mut found = false;
    m.search(n, &mut |_| {
        found = true;
        false
    });
    found
}

/// All values slot `free` takes over body groundings consistent with `binding`.
pub fn body_answers(
    rule: &Rule,
    graph: &DataGraph,
    binding: &[Option<NodeId>],
    free: Var,
    mode: SymmetryMode,
) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let Some(mut m) = matcher(rule, graph, binding, mode) else { return out };
    let n = m.atoms.len();
    m.search(n, &mut |assign| {
        if let Some(v) = assign[free as usize] {
            out.insert(v);
        }
        true
    });
    out
}

/// Which argument of a test fact is hidden.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Missing {
    Unary,
    Subject,
    Object,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub pred: PredId,
    /// The visible endpoint of a binary query.
    pub known: Option<NodeId>,
    pub missing: Missing,
}

/// Entities the theory predicts for `query`, as values of the hidden slot.
fn rule_predictions(rule: &Rule, query: &Query, graph: &DataGraph, mode: SymmetryMode) -> BTreeSet<NodeId> {
    let head = rule.head();
    if head.pred != query.pred {
        return BTreeSet::new();
    }
    let n = rule.pattern().var_count();
    match (head.args, query.missing, query.known) {
        (Args::One(x), Missing::Unary, _) => body_answers(rule, graph, &vec![None; n], x, mode),
        (Args::Two(x, y), Missing::Subject | Missing::Object, Some(k)) => {
            let mut orientations = Vec::with_capacity(2);
            // Known endpoint goes to the head slot in its own position.
            let (known_slot, free_slot) = if query.missing == Missing::Object { (x, y) } else { (y, x) };
            orientations.push((known_slot, free_slot));
            if mode == SymmetryMode::Unordered {
                orientations.push((free_slot, known_slot));
            }
            let mut out = BTreeSet::new();
            for (ks, fs) in orientations {
                let mut binding = vec![None; n];
                binding[ks as usize] = Some(k);
                if ks == fs {
                    if match_body(rule, graph, &binding, mode) {
                        out.insert(k);
                    }
                } else {
                    out.extend(body_answers(rule, graph, &binding, fs, mode));
                }
            }
            out
        }
        _ => BTreeSet::new(),
    }
}

/// Per-entity score and the indices of the rules that fired for it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Score {
    pub value: f64,
    pub rules: Vec<usize>,
}

/// Sums rule weights per predicted entity. Each rule counts once per entity;
/// weights are added in sorted order so the result ignores theory order.
pub fn score_candidates(
    query: &Query,
    theory: &[WeightedRule],
    graph: &DataGraph,
    mode: SymmetryMode,
) -> FxHashMap<NodeId, Score> {
    let mut scores: FxHashMap<NodeId, Score> = FxHashMap::default();
    for (i, wr) in theory.iter().enumerate() {
        for e in rule_predictions(&wr.rule, query, graph, mode) {
            scores.entry(e).or_default().rules.push(i);
        }
    }
    for score in scores.values_mut() {
        let mut ws: Vec<f64> = score.rules.iter().map(|&i| theory[i].weight).collect();
        ws.sort_by(f64::total_cmp);
        score.value = ws.iter().sum();
    }
    scores
}

/// Test facts resolved against the training symbols. Constants absent from
/// training get ids from `num_constants` upward.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TestSet {
    pub facts: Vec<Fact>,
    pub unseen_constants: Vec<String>,
}

impl TestSet {
    pub fn resolve(raw: &[RawFact], db: &Database) -> Result<TestSet, EvalError> {
        let mut unseen: BTreeMap<&str, NodeId> = BTreeMap::new();
        let mut unseen_order: Vec<String> = Vec::new();
        let mut facts = Vec::with_capacity(raw.len());
        let mut seen = FxHashSet::default();
        for r in raw {
            let pred = db.predicate_id(&r.predicate).ok_or_else(|| EvalError::UnknownPredicate(r.predicate.clone()))?;
            let expected = db.arity(pred).as_usize();
            if expected != r.args.len() {
                return Err(EvalError::Config(format!(
                    "line {}: predicate `{}` has arity {expected} in training but {} here",
                    r.line,
                    r.predicate,
                    r.args.len()
                )));
            }
            let mut ids = Vec::with_capacity(2);
            for a in &r.args {
                let id = match db.constant_id(a) {
                    Some(id) => id,
                    None => *unseen.entry(a.as_str()).or_insert_with(|| {
                        unseen_order.push(a.clone());
                        (db.num_constants() + unseen_order.len() - 1) as NodeId
                    }),
                };
                ids.push(id);
            }
            let fact = if ids.len() == 1 { Fact::unary(pred, ids[0]) } else { Fact::binary(pred, ids[0], ids[1]) };
            if seen.insert(fact) {
                facts.push(fact);
            }
        }
        Ok(TestSet { facts, unseen_constants: unseen_order })
    }

    pub fn constant_name<'a>(&'a self, db: &'a Database, id: NodeId) -> &'a str {
        if (id as usize) < db.num_constants() {
            db.constant_name(id)
        } else {
            &self.unseen_constants[id as usize - db.num_constants()]
        }
    }
}

/// Mean-rank position of the true entity: one plus the number of strictly
/// better candidates plus half the number of tied ones.
pub fn mean_rank(true_score: f64, others: impl IntoIterator<Item = f64>) -> f64 {
    let (mut better, mut tied) = (0usize, 0usize);
    for s in others {
        if s > true_score {
            better += 1;
        } else if s == true_score {
            tied += 1;
        }
    }
    1.0 + better as f64 + tied as f64 / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub fact: Fact,
    pub missing: Missing,
    pub rank: f64,
    /// Best-scoring candidates: (entity, score, firing rule indices).
    pub top: Vec<(NodeId, f64, Vec<usize>)>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub n_queries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutput {
    pub metrics: Metrics,
    pub queries: Vec<QueryResult>,
}

pub const DEBUG_TOP: usize = 5;

/// Candidate universes: constants seen in training as unary arguments,
/// binary subjects and binary objects.
fn candidate_sets(db: &Database) -> [Vec<NodeId>; 3] {
    let mut sets = [BTreeSet::new(), BTreeSet::new(), BTreeSet::new()];
    for f in db.facts() {
        match f.terms {
            Terms::Unary(a) => {
                sets[0].insert(a);
            }
            Terms::Binary(a, b) => {
                sets[1].insert(a);
                sets[2].insert(b);
            }
        }
    }
    sets.map(|s| s.into_iter().collect())
}

pub fn evaluate(
    test: &TestSet,
    theory: &[WeightedRule],
    db: &Database,
    graph: &DataGraph,
    cfg: &EvalConfig,
) -> Result<EvalOutput, EvalError> {
    cfg.validate()?;
    if test.facts.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let universes = candidate_sets(db);
    let mut known_true: FxHashSet<Fact> = db.facts().iter().copied().collect();
    known_true.extend(test.facts.iter().copied());

    let mut tasks = Vec::new();
    for &fact in &test.facts {
        match fact.terms {
            Terms::Unary(_) => tasks.push((fact, Missing::Unary)),
            Terms::Binary(..) => {
                if cfg.direction != Direction::Head {
                    tasks.push((fact, Missing::Object));
                }
                if cfg.direction != Direction::Tail {
                    tasks.push((fact, Missing::Subject));
                }
            }
        }
    }
    if tasks.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }

    let queries: Vec<QueryResult> = tasks
        .par_iter()
        .map(|&(fact, missing)| {
            let (answer, known, universe) = match (fact.terms, missing) {
                (Terms::Unary(a), _) => (a, None, &universes[0]),
                (Terms::Binary(s, o), Missing::Object) => (o, Some(s), &universes[2]),
                (Terms::Binary(s, o), _) => (s, Some(o), &universes[1]),
            };
            let query = Query { pred: fact.pred, known, missing };
            let scores = score_candidates(&query, theory, graph, cfg.mode);
            let score_of = |e: NodeId| scores.get(&e).map_or(0.0, |s| s.value);
            let with = |e: NodeId| match (missing, known) {
                (Missing::Unary, _) => Fact::unary(fact.pred, e),
                (Missing::Object, Some(k)) => Fact::binary(fact.pred, k, e),
                (_, Some(k)) => Fact::binary(fact.pred, e, k),
                (_, None) => unreachable!("binary queries have a known endpoint"),
            };
            let others = universe
                .iter()
                .copied()
                .filter(|&e| e != answer && !(cfg.filtered && known_true.contains(&with(e))))
                .map(score_of);
            let rank = mean_rank(score_of(answer), others);
            let mut top: Vec<(NodeId, f64, Vec<usize>)> =
                scores.iter().map(|(&e, s)| (e, s.value, s.rules.clone())).collect();
            top.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            top.truncate(DEBUG_TOP);
            QueryResult { fact, missing, rank, top }
        })
        .collect();

    let n = queries.len() as f64;
    let mrr = queries.iter().map(|q| 1.0 / q.rank).sum::<f64>() / n;
    let hits = cfg
        .hits
        .iter()
        .map(|&k| (k, queries.iter().filter(|q| q.rank <= k as f64).count() as f64 / n))
        .collect();
    Ok(EvalOutput { metrics: Metrics { mrr, hits, n_queries: queries.len() }, queries })
}

/// Per-query debug lines: query, rank, then up to five `entity:score:rules` cells.
pub fn write_queries_tsv<W: std::io::Write>(
    out: &EvalOutput,
    test: &TestSet,
    db: &Database,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "#query\trank\ttop")?;
    for q in &out.queries {
        let name = |id| test.constant_name(db, id);
        let pred = db.predicate_name(q.fact.pred);
        let text = match (q.fact.terms, q.missing) {
            (Terms::Unary(_), _) => format!("{pred}(?)"),
            (Terms::Binary(s, _), Missing::Object) => format!("{pred}({},?)", name(s)),
            (Terms::Binary(_, o), _) => format!("{pred}(?,{})", name(o)),
        };
        let cells: Vec<String> = q
            .top
            .iter()
            .map(|(e, s, rules)| {
                let ids: Vec<String> = rules.iter().map(|r| (r + 1).to_string()).collect();
                format!("{}:{}:{}", name(*e), crate::format::sig6(*s), ids.join(","))
            })
            .collect();
        let answer = match q.fact.terms {
            Terms::Unary(a) => a,
            Terms::Binary(s, o) => if q.missing == Missing::Object { o } else { s },
        };
        writeln!(w, "{text}={}\t{}\t{}", name(answer), crate::format::sig6(q.rank), cells.join("\t"))?;
    }
    Ok(())
}
