// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic databases for tests, benchmarks and acceptance runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Database;

/// Random labelled graph over `nodes` constants with binary predicates
/// `b0..b2` (5% self-loops) and unary predicates `u0..u2`. At least one and
/// at most `max_binary` binary facts, at most `max_unary` unary facts,
/// before deduplication.
pub fn random_labelled(seed: u64, nodes: usize, max_binary: usize, max_unary: usize) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new();
    let binary = rng.gen_range(1..=max_binary);
    let unary = rng.gen_range(0..=max_unary);
    for _ in 0..binary {
        let a = rng.gen_range(0..nodes);
        let b = if rng.gen_bool(0.05) { a } else { rng.gen_range(0..nodes) };
        let p = format!("b{}", rng.gen_range(0..3));
        db.add(&p, &[&format!("n{a}"), &format!("n{b}")]).expect("fixed arities");
    }
    for _ in 0..unary {
        let a = rng.gen_range(0..nodes);
        let p = format!("u{}", rng.gen_range(0..3));
        db.add(&p, &[&format!("n{a}")]).expect("fixed arities");
    }
    db
}

/// One predicate `r` with each ordered pair of distinct nodes present
/// independently with probability `p`.
pub fn erdos_renyi(seed: u64, nodes: usize, p: f64) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new();
    for a in 0..nodes {
        for b in 0..nodes {
            if a != b && rng.gen_bool(p) {
                db.add("r", &[&format!("n{a}"), &format!("n{b}")]).expect("fixed arity");
            }
        }
    }
    db
}

/// Likes/dislikes population.
///
/// `users` (rounded down to even) users form disjoint friend pairs. In each
/// pair the first user likes a fresh item and the friend likes it or
/// dislikes it with equal probability. Background users each dislike one
/// fresh item, in exactly the number needed for dislikes to be ten times
/// likes.
pub fn likes_dislikes(seed: u64, users: usize) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new();
    let mut likes = 0usize;
    let mut dislikes = 0usize;
    for k in 0..users / 2 {
        let (u1, u2, item) = (format!("u{}", 2 * k), format!("u{}", 2 * k + 1), format!("i{k}"));
        db.add("friends", &[&u1, &u2]).expect("fixed arity");
        db.add("likes", &[&u1, &item]).expect("fixed arity");
        likes += 1;
        if rng.gen_bool(0.5) {
            db.add("likes", &[&u2, &item]).expect("fixed arity");
            likes += 1;
        } else {
            db.add("dislikes", &[&u2, &item]).expect("fixed arity");
            dislikes += 1;
        }
    }
    for k in 0..(10 * likes).saturating_sub(dislikes) {
        db.add("dislikes", &[&format!("x{k}"), &format!("y{k}")]).expect("fixed arity");
    }
    db
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CitationConfig {
    pub papers: usize,
    pub categories: usize,
    pub links: usize,
    /// Probability that a link joins two papers of the same category.
    pub homophily: f64,
}

impl Default for CitationConfig {
    fn default() -> Self {
        CitationConfig { papers: 1500, categories: 6, links: 3600, homophily: 0.85 }
    }
}

/// Citation graph with categorical labels.
///
/// Every paper gets one `HasCat(paper, cN)` fact and links are drawn with
/// the configured homophily. Papers of category `c0` also each get a
/// `Funded(paper, gK)` fact to a grant of their own, a dependency that no
/// term-constrained rule can express.
pub fn citation_graph(seed: u64, cfg: &CitationConfig) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new();
    let cats: Vec<usize> = (0..cfg.papers).map(|_| rng.gen_range(0..cfg.categories)).collect();
    let mut by_cat: Vec<Vec<usize>> = vec![Vec::new(); cfg.categories];
    for (p, &c) in cats.iter().enumerate() {
        db.add("HasCat", &[&format!("p{p}"), &format!("c{c}")]).expect("fixed arity");
        by_cat[c].push(p);
    }
    let mut grant = 0;
    for (p, &c) in cats.iter().enumerate() {
        if c == 0 {
            db.add("Funded", &[&format!("p{p}"), &format!("g{grant}")]).expect("fixed arity");
            grant += 1;
        }
    }
    let mut added = 0;
    while added < cfg.links {
        let a = rng.gen_range(0..cfg.papers);
        let b = if rng.gen_bool(cfg.homophily) {
            *by_cat[cats[a]].choose(&mut rng).expect("nonempty category")
        } else {
            rng.gen_range(0..cfg.papers)
        };
        if a == b {
            continue;
        }
        if db.add("Link", &[&format!("p{a}"), &format!("p{b}")]).expect("fixed arity").1 {
            added += 1;
        }
    }
    db
}
