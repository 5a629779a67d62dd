// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relrules::data::{Database, Fact, FactId, NodeId};
use relrules::graph::DataGraph;
use relrules::miner::{exhaustive_paths_budget, mine_patterns, MinerConfig};
use relrules::pattern::{Args, Atom, SymmetryMode};
use relrules::rule::{enumerate_rules, Rule};
use relrules::utility::{
    rule_stats, theory_utility, ComplexityExponent, PriorFamily, PriorTable, RuleStats, TheoryAccumulator,
};

/// Every fact an atom can denote once its slots are fixed.
fn images(atom: &Atom, theta: &[NodeId], db: &Database, mode: SymmetryMode) -> Vec<FactId> {
    let mut out = Vec::new();
    match atom.args {
        Args::One(a) => out.extend(db.fact_id(&Fact::unary(atom.pred, theta[a as usize]))),
        Args::Two(a, b) => {
            let (x, y) = (theta[a as usize], theta[b as usize]);
            out.extend(db.fact_id(&Fact::binary(atom.pred, x, y)));
            if mode == SymmetryMode::Unordered && x != y {
                out.extend(db.fact_id(&Fact::binary(atom.pred, y, x)));
            }
        }
    }
    out
}

/// Ground graphs (fact-id sets) of `atoms` found by trying every injective
/// assignment of slots to constants, each with the head facts it can map to.
fn substitution_graphs(
    atoms: &[Atom],
    head: Option<usize>,
    vars: usize,
    db: &Database,
    mode: SymmetryMode,
) -> BTreeMap<Vec<FactId>, BTreeSet<FactId>> {
    let n = db.num_constants() as NodeId;
    let mut out: BTreeMap<Vec<FactId>, BTreeSet<FactId>> = BTreeMap::new();
    let mut theta = vec![0; vars];
    fn assign(
        i: usize,
        theta: &mut Vec<NodeId>,
        n: NodeId,
        visit: &mut dyn FnMut(&[NodeId]),
    ) {
        if i == theta.len() {
            visit(theta);
            return;
        }
        for c in 0..n {
            if theta[..i].contains(&c) {
                continue;
            }
            theta[i] = c;
            assign(i + 1, theta, n, visit);
        }
    }
    assign(0, &mut theta, n, &mut |theta| {
        let per_atom: Vec<Vec<FactId>> = atoms.iter().map(|a| images(a, theta, db, mode)).collect();
        if per_atom.iter().any(Vec::is_empty) {
            return;
        }
        // Cartesian product over the atom images.
        let mut idx = vec![0; atoms.len()];
        loop {
            let chosen: Vec<FactId> = idx.iter().zip(&per_atom).map(|(&i, imgs)| imgs[i]).collect();
            let mut graph = chosen.clone();
            graph.sort_unstable();
            graph.dedup();
            if graph.len() == atoms.len() {
                let heads = out.entry(graph).or_default();
                if let Some(h) = head {
                    heads.insert(chosen[h]);
                }
            }
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < per_atom[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    });
    out
}

fn all_rule_stats(db: &Database, depth: usize, mode: SymmetryMode) -> Vec<(Rule, String, RuleStats)> {
    let g = DataGraph::build(db);
    let paths = exhaustive_paths_budget(&g, depth);
    let store = mine_patterns(&g, &MinerConfig { depth, paths, mode, ..MinerConfig::default() }).unwrap();
    let priors = PriorTable::new(db, PriorFamily::Typed);
    let mut out = Vec::new();
    for (_, entry) in store.iter() {
        for (rule, text) in enumerate_rules(&entry.exemplar, db.predicates(), mode) {
            if let Ok(stats) = rule_stats(&rule, &store, &g, &priors) {
                out.push((rule, text, stats));
            }
        }
    }
    out
}

#[test]
fn precision_and_degrees_match_substitution_oracle() {
    let mut checked = 0;
    for seed in 0..20 {
        let db = common::random_db(seed, 7, 30, 15);
        assert!(db.len() <= 50);
        for mode in [SymmetryMode::Unordered, SymmetryMode::Ordered] {
            for (rule, text, stats) in all_rule_stats(&db, 2, mode) {
                let vars = rule.pattern().var_count();
                let atoms = rule.pattern().atoms();
                let body: Vec<Atom> = rule.body_atoms().copied().collect();
                let rule_graphs = substitution_graphs(atoms, Some(rule.head_index()), vars, &db, mode);
                let body_graphs = substitution_graphs(&body, None, vars, &db, mode);
                assert_eq!(stats.rule_count, rule_graphs.len() as u64, "{text} seed {seed} {mode}");
                assert_eq!(stats.body_count, body_graphs.len() as u64, "{text} seed {seed} {mode}");
                let mut degrees: BTreeMap<FactId, u32> = BTreeMap::new();
                for heads in rule_graphs.values() {
                    for &f in heads {
                        *degrees.entry(f).or_default() += 1;
                    }
                }
                let expected: Vec<(FactId, u32)> = degrees.into_iter().collect();
                assert_eq!(stats.degrees, expected, "{text} seed {seed} {mode}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "only {checked} rules checked");
}

#[test]
fn theory_utility_matches_direct_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut trials = 0;
    for seed in 0..30 {
        let db = common::random_db(1000 + seed, 8, 22, 8);
        let pool = all_rule_stats(&db, 2, SymmetryMode::Unordered);
        if pool.len() < 4 {
            continue;
        }
        for _ in 0..5 {
            let picked: Vec<&RuleStats> = pool.choose_multiple(&mut rng, 4).map(|(_, _, s)| s).collect();
            for exponent in [ComplexityExponent::GroupSize, ComplexityExponent::TheorySize] {
                let want = common::direct_theory_utility(&picked, exponent);
                assert!(common::close(theory_utility(picked.iter().copied(), exponent), want));
                let mut acc = TheoryAccumulator::new(exponent);
                for (k, r) in picked.iter().enumerate() {
                    let predicted = acc.utility_with(r);
                    acc.add(r);
                    let prefix = common::direct_theory_utility(&picked[..=k], exponent);
                    assert!(common::close(predicted, prefix), "{predicted} vs {prefix}");
                    assert!(common::close(acc.utility(), prefix));
                }
            }
            trials += 1;
        }
    }
    assert!(trials >= 50);
}

#[test]
fn singleton_theory_equals_rule_utility() {
    let db = common::random_db(4, 8, 30, 10);
    for (_, text, s) in all_rule_stats(&db, 2, SymmetryMode::Unordered) {
        for exponent in [ComplexityExponent::GroupSize, ComplexityExponent::TheorySize] {
            assert!(common::close(theory_utility([&s], exponent), s.utility), "{text}");
        }
    }
}

#[test]
fn same_head_same_facts_saturates_recall() {
    let db = common::random_db(8, 8, 40, 10);
    let pool = all_rule_stats(&db, 2, SymmetryMode::Unordered);
    let s = pool.iter().map(|(_, _, s)| s).find(|s| s.recall > 0.0).expect("a rule with recall");
    let twin = s.clone();
    // Group recall of two rules recalling the same facts is below the sum of their recalls.
    let both = theory_utility([s, &twin], ComplexityExponent::GroupSize);
    let scale = 2.0 * s.corrected_precision() * s.complexity;
    assert!(both / scale < 2.0 * s.recall);
    let group_recall: f64 = s.degrees.iter().map(|&(_, d)| (1.0 + 2.0 * d as f64).ln()).sum();
    assert!(common::close(both / scale, group_recall));
}

/// Slot permutations that map the atom set onto itself.
fn automorphisms(atoms: &[Atom], vars: usize, mode: SymmetryMode) -> usize {
    let norm = |a: Atom| match (a.args, mode) {
        (Args::Two(x, y), SymmetryMode::Unordered) if x > y => Atom::binary(a.pred, y, x),
        _ => a,
    };
    let base: BTreeSet<Atom> = atoms.iter().map(|&a| norm(a)).collect();
    let mut perm: Vec<u8> = (0..vars as u8).collect();
    let mut count = 0;
    loop {
        let mapped: BTreeSet<Atom> = atoms
            .iter()
            .map(|a| {
                let args = match a.args {
                    Args::One(x) => Args::One(perm[x as usize]),
                    Args::Two(x, y) => Args::Two(perm[x as usize], perm[y as usize]),
                };
                norm(Atom { pred: a.pred, args })
            })
            .collect();
        count += usize::from(mapped == base);
        // Next lexicographic permutation.
        let Some(i) = (0..perm.len().saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else { break };
        let j = (i + 1..perm.len()).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    count
}

#[test]
fn rule_count_is_bounded_by_body_symmetries() {
    // A body grounding extends to at most one head fact per body automorphism
    // and head orientation, so P can exceed 1 only for symmetric bodies.
    let mut above = 0;
    for seed in 0..10 {
        let db = common::random_db(200 + seed, 9, 40, 12);
        for mode in [SymmetryMode::Unordered, SymmetryMode::Ordered] {
            for (rule, text, s) in all_rule_stats(&db, 2, mode) {
                assert!(s.recall >= 0.0 && s.utility >= 0.0);
                let body: Vec<Atom> = rule.body_atoms().copied().collect();
                let aut = automorphisms(&body, rule.pattern().var_count(), mode) as u64;
                let orient = if mode == SymmetryMode::Unordered && !rule.head().is_unary() { 2 } else { 1 };
                assert!(s.rule_count <= s.body_count * aut * orient, "{text} in {mode}");
                if s.rule_count > s.body_count {
                    above += 1;
                    assert!(aut * orient > 1, "{text} in {mode}");
                }
            }
        }
    }
    eprintln!("rules with precision above one: {above}");
}
