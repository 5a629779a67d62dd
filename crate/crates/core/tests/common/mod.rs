// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use relrules::data::{Database, FactId};
use relrules::utility::{ComplexityExponent, HeadKey, RuleStats};

pub fn random_db(seed: u64, nodes: usize, max_binary: usize, max_unary: usize) -> Database {
    relrules::synth::random_labelled(seed, nodes, max_binary, max_unary)
}

/// The eleven-node walkthrough graph: v0 carries unary e0 and binaries e1, e2.
pub fn walkthrough_db() -> Database {
    let mut db = Database::new();
    db.add("p1", &["v0"]).unwrap();
    db.add("p2", &["v0", "v1"]).unwrap();
    db.add("p3", &["v0", "v2"]).unwrap();
    db.add("p1", &["v3"]).unwrap();
    db.add("p3", &["v1", "v3"]).unwrap();
    db.add("p2", &["v1", "v4"]).unwrap();
    db.add("p1", &["v5"]).unwrap();
    db.add("p3", &["v2", "v5"]).unwrap();
    db.add("p3", &["v2", "v6"]).unwrap();
    db.add("p2", &["v2", "v7"]).unwrap();
    db
}

/// Theory utility evaluated straight from its definition.
pub fn direct_theory_utility(rules: &[&RuleStats], exponent: ComplexityExponent) -> f64 {
    let heads: BTreeSet<HeadKey> = rules.iter().map(|r| r.head).collect();
    let mut total = 0.0;
    for h in heads {
        let group: Vec<&RuleStats> = rules.iter().copied().filter(|r| r.head == h).collect();
        let mut per_fact: BTreeMap<FactId, f64> = BTreeMap::new();
        for r in &group {
            for &(f, d) in &r.degrees {
                *per_fact.entry(f).or_default() += d as f64;
            }
        }
        let recall: f64 = per_fact.values().map(|d| (1.0 + d).ln()).sum();
        let k = match exponent {
            ComplexityExponent::GroupSize => group.len(),
            ComplexityExponent::TheorySize => rules.len(),
        };
        let product: f64 = group.iter().map(|r| (-(r.length as f64)).exp()).product();
        let complexity = product.powf(1.0 / k as f64);
        let corrected: f64 = group
            .iter()
            .map(|r| {
                let p = *r.precision.numer() as f64 / *r.precision.denom() as f64;
                let b = *r.prior.numer() as f64 / *r.prior.denom() as f64;
                p * r.symmetry as f64 / b
            })
            .sum();
        total += corrected * recall * complexity;
    }
    total
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

