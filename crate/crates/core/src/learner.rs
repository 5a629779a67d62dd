// SPDX-License-Identifier: Apache-2.0

//! End-to-end theory learning: budget, mining, candidate scoring, top-M
//! selection and greedy ordering by contributed theory utility.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::Database;
use crate::error::{LearnError, UtilityError};
use crate::graph::DataGraph;
use crate::miner::{mine_patterns_with_stats, MinerConfig};
use crate::pattern::{SymmetryMode, DEFAULT_NODE_CAP};
use crate::rule::{enumerate_rules, Rule};
use crate::store::PatternStore;
use crate::utility::{
    ratio_f64, rule_stats, ComplexityExponent, HeadKey, PriorFamily, PriorTable, RuleStats, TheoryAccumulator,
};

/// Euler–Mascheroni constant as used by the worst-case budget.
pub const EULER_GAMMA: f64 = 0.5772156649;

/// Path budget used for the pilot pass that estimates the pattern count.
pub const PILOT_PATHS: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetFormula {
    /// `N = max(1, ceil(M * D / (|V| * eps^2)))`.
    #[default]
    Practical,
    /// `N = ceil(9 * M * (gamma + ln P) / eps^2)` for an estimate `P` of the number of patterns.
    WorstCase,
}

impl std::str::FromStr for BudgetFormula {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "practical" => Ok(BudgetFormula::Practical),
            "worst_case" | "worst-case" => Ok(BudgetFormula::WorstCase),
            other => Err(format!("unknown budget formula `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LearnerConfig {
    /// Maximum theory size.
    pub m: usize,
    pub epsilon: f64,
    pub depth: usize,
    /// Fixed path budget; computed from the formula when absent.
    pub paths: Option<usize>,
    pub budget: BudgetFormula,
    pub pattern_space_estimate: Option<f64>,
    pub mode: SymmetryMode,
    pub prior_family: PriorFamily,
    pub complexity_exponent: ComplexityExponent,
    pub seed: u64,
    pub node_cap: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            m: 30,
            epsilon: 0.1,
            depth: 3,
            paths: None,
            budget: BudgetFormula::Practical,
            pattern_space_estimate: None,
            mode: SymmetryMode::Unordered,
            prior_family: PriorFamily::Typed,
            complexity_exponent: ComplexityExponent::GroupSize,
            seed: 0,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.m == 0 {
            return Err(LearnError::Config("M must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(LearnError::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.depth == 0 {
            return Err(LearnError::Config("depth must be at least 1".into()));
        }
        if self.paths == Some(0) {
            return Err(LearnError::Config("the path budget must be at least 1".into()));
        }
        if let Some(p) = self.pattern_space_estimate {
            if p.is_nan() || p < 1.0 {
                return Err(LearnError::Config(format!("pattern-space estimate must be at least 1, got {p}")));
            }
        }
        Ok(())
    }
}

fn ceil_with_tolerance(x: f64) -> usize {
    // Absorb representation error so that e.g. 2400.0000000000005 rounds to 2400.
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// Path budget `N` from the configured formula.
pub fn compute_paths_budget(
    cfg: &LearnerConfig,
    nodes: usize,
    pattern_space_estimate: Option<f64>,
) -> Result<usize, LearnError> {
    if let Some(n) = cfg.paths {
        return Ok(n);
    }
    let eps2 = cfg.epsilon * cfg.epsilon;
    match cfg.budget {
        BudgetFormula::Practical => {
            if nodes == 0 {
                return Err(LearnError::EmptyDatabase);
            }
            let x = (cfg.m * cfg.depth) as f64 / (nodes as f64 * eps2);
            Ok(ceil_with_tolerance(x).max(1))
        }
        BudgetFormula::WorstCase => {
            let p = pattern_space_estimate.or(cfg.pattern_space_estimate).ok_or_else(|| {
                LearnError::Config("the worst-case budget needs a pattern-space estimate".into())
            })?;
            let x = 9.0 * cfg.m as f64 * (EULER_GAMMA + p.ln()) / eps2;
            Ok(ceil_with_tolerance(x).max(1))
        }
    }
}

/// A scored rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub rule: Rule,
    pub text: String,
    pub stats: RuleStats,
}

/// Every admissible rule supported by the store whose corrected precision
/// `P * S / B` exceeds 1, sorted by rule text.
pub fn generate_candidates(
    store: &PatternStore,
    db: &Database,
    graph: &DataGraph,
    priors: &PriorTable,
) -> Result<Vec<Candidate>, LearnError> {
    let entries: Vec<_> = store.iter().map(|(_, e)| &e.exemplar).collect();
    let per_pattern: Vec<Result<Vec<Candidate>, LearnError>> = entries
        .par_iter()
        .map(|pattern| {
            let mut out = Vec::new();
            for (rule, text) in enumerate_rules(pattern, db.predicates(), store.mode()) {
                match rule_stats(&rule, store, graph, priors) {
                    Ok(stats) if stats.beats_prior() => out.push(Candidate { rule, text, stats }),
                    Ok(_) | Err(UtilityError::UndefinedPrecision) | Err(UtilityError::MissingRulePattern) => {}
                    Err(UtilityError::Pattern(e)) => return Err(LearnError::Pattern(e)),
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for chunk in per_pattern {
        all.extend(chunk?);
    }
    all.sort_by(|a, b| a.text.cmp(&b.text));
    Ok(all)
}

/// Ranking order: utility descending, then precision descending, then text.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.stats
        .utility
        .total_cmp(&a.stats.utility)
        .then_with(|| b.stats.precision.cmp(&a.stats.precision))
        .then_with(|| a.text.cmp(&b.text))
}

pub fn choose_top_m(mut cands: Vec<Candidate>, m: usize) -> Vec<Candidate> {
    cands.sort_by(rank_order);
    cands.truncate(m);
    cands
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryEntry {
    pub rule: Rule,
    pub text: String,
    pub stats: RuleStats,
    /// Rule weight: the rule's precision.
    pub weight: f64,
    /// Theory utility after adding this rule.
    pub cumulative_utility: f64,
}

/// Rules in greedy selection order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Theory {
    pub entries: Vec<TheoryEntry>,
    pub complexity_exponent: ComplexityExponent,
}

impl Theory {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry indices grouped by head atom.
    pub fn groups(&self) -> BTreeMap<HeadKey, Vec<usize>> {
        let mut out: BTreeMap<HeadKey, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            out.entry(e.stats.head).or_default().push(i);
        }
        out
    }
}

/// Counters from a greedy run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GreedyStats {
    pub utility_evaluations: usize,
}

/// Repeatedly appends the candidate that maximises the theory utility of the
/// extended theory. Ties go to higher individual utility, then smaller text.
pub fn greedy_order(cands: Vec<Candidate>, exponent: ComplexityExponent) -> (Theory, GreedyStats) {
    let mut remaining = cands;
    let mut acc = TheoryAccumulator::new(exponent);
    let mut theory = Theory { entries: Vec::with_capacity(remaining.len()), complexity_exponent: exponent };
    let mut stats = GreedyStats::default();
    while !remaining.is_empty() {
        let scores: Vec<f64> = remaining.par_iter().map(|c| acc.utility_with(&c.stats)).collect();
        stats.utility_evaluations += scores.len();
        let mut best = 0;
        for i in 1..remaining.len() {
            let order = scores[i]
                .total_cmp(&scores[best])
                .then_with(|| remaining[i].stats.utility.total_cmp(&remaining[best].stats.utility))
                .then_with(|| remaining[best].text.cmp(&remaining[i].text));
            if order == Ordering::Greater {
                best = i;
            }
        }
        let chosen = remaining.remove(best);
        acc.add(&chosen.stats);
        theory.entries.push(TheoryEntry {
            weight: ratio_f64(&chosen.stats.precision),
            cumulative_utility: acc.utility(),
            rule: chosen.rule,
            text: chosen.text,
            stats: chosen.stats,
        });
    }
    (theory, stats)
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct StageTimes {
    pub build_graph_s: f64,
    pub pilot_s: f64,
    pub mine_s: f64,
    pub candidates_s: f64,
    pub greedy_s: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LearnReport {
    pub config: LearnerConfig,
    pub nodes: usize,
    pub edges: usize,
    pub paths_used: usize,
    pub pattern_space_estimate: Option<f64>,
    pub store_patterns: usize,
    pub store_groundings: usize,
    pub recursions: u64,
    pub candidates: usize,
    pub theory_size: usize,
    pub utility_evaluations: usize,
    pub times: StageTimes,
}

#[derive(Clone, Debug)]
pub struct LearnOutput {
    pub theory: Theory,
    /// Every candidate that passed the filter, sorted by rank order.
    pub candidates: Vec<Candidate>,
    pub store: PatternStore,
    pub report: LearnReport,
}

pub fn learn(db: &Database, cfg: &LearnerConfig) -> Result<LearnOutput, LearnError> {
    cfg.validate()?;
    if db.is_empty() {
        return Err(LearnError::EmptyDatabase);
    }
    let mut times = StageTimes::default();
    let t = Instant::now();
    let graph = DataGraph::build(db);
    times.build_graph_s = t.elapsed().as_secs_f64();

    let miner = |paths| MinerConfig {
        depth: cfg.depth,
        paths,
        seed: cfg.seed,
        node_cap: cfg.node_cap,
        mode: cfg.mode,
    };
    let mut estimate = cfg.pattern_space_estimate;
    if cfg.paths.is_none() && cfg.budget == BudgetFormula::WorstCase && estimate.is_none() {
        let t = Instant::now();
        let (pilot, _) = mine_patterns_with_stats(&graph, &miner(PILOT_PATHS))?;
        estimate = Some(pilot.len().max(1) as f64);
        times.pilot_s = t.elapsed().as_secs_f64();
    }
    let paths = compute_paths_budget(cfg, graph.node_count(), estimate)?;

    let t = Instant::now();
    let (store, mine_stats) = mine_patterns_with_stats(&graph, &miner(paths))?;
    times.mine_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let priors = PriorTable::new(db, cfg.prior_family);
    let mut candidates = generate_candidates(&store, db, &graph, &priors)?;
    candidates.sort_by(rank_order);
    times.candidates_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let top = choose_top_m(candidates.clone(), cfg.m);
    let (theory, greedy) = greedy_order(top, cfg.complexity_exponent);
    times.greedy_s = t.elapsed().as_secs_f64();

    let report = LearnReport {
        config: cfg.clone(),
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        paths_used: paths,
        pattern_space_estimate: estimate,
        store_patterns: store.len(),
        store_groundings: store.total_groundings(),
        recursions: mine_stats.recursions,
        candidates: candidates.len(),
        theory_size: theory.len(),
        utility_evaluations: greedy.utility_evaluations,
        times,
    };
    Ok(LearnOutput { theory, candidates, store, report })
}
