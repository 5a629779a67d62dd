// SPDX-License-Identifier: Apache-2.0

//! Bounded path mining of ground patterns.
//!
//! From every source node the miner walks edge-distinct paths of at most `D`
//! binary edges. At each visited node it grafts at most one of the node's
//! unary facts onto every pattern carried along the path, then continues
//! along up to `n` unvisited binary edges, splitting the path budget `n`
//! between them. Every intermediate grafted set is recorded.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use smallvec::SmallVec;

use crate::data::{FactId, NodeId};
use crate::error::MineError;
use crate::graph::DataGraph;
use crate::pattern::{SymmetryMode, DEFAULT_NODE_CAP};
use crate::store::{graft, GroundPattern, PatternStore};

/// Largest graph accepted by [`brute_force_enumerate`].
pub const BRUTE_FORCE_FACT_LIMIT: usize = 500;

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MinerConfig {
    /// Maximum number of binary edges per path.
    pub depth: usize,
    /// Path budget per source node.
    pub paths: usize,
    pub seed: u64,
    pub node_cap: usize,
    pub mode: SymmetryMode,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig { depth: 3, paths: 1, seed: 0, node_cap: DEFAULT_NODE_CAP, mode: SymmetryMode::default() }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<(), MineError> {
        if self.paths == 0 {
            return Err(MineError::Config("the path budget must be at least 1".into()));
        }
        if self.depth + 1 > self.node_cap {
            return Err(MineError::Config(format!(
                "depth {} needs up to {} variables, above the node cap {}",
                self.depth,
                self.depth + 1,
                self.node_cap
            )));
        }
        Ok(())
    }
}

/// Counters gathered while mining.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct MineStats {
    /// Binary-edge selections (recursive steps), summed over sources.
    pub recursions: u64,
    /// Ground patterns emitted before global deduplication.
    pub emitted: u64,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn source_rng(seed: u64, node: NodeId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(node as u64)))
}

/// All unordered pairs of distinct unary facts on `v`.
pub fn double_unary_patterns(v: NodeId, g: &DataGraph) -> Vec<GroundPattern> {
    let unary = g.unary_of(v);
    let mut out = Vec::with_capacity(unary.len() * unary.len().saturating_sub(1) / 2);
    for (i, &a) in unary.iter().enumerate() {
        for &b in &unary[i + 1..] {
            out.push(GroundPattern::from_slice(&[a, b]));
        }
    }
    out
}

struct Frame {
    node: NodeId,
    depth: usize,
    budget: usize,
    current: Vec<GroundPattern>,
    previous: SmallVec<[FactId; 4]>,
}

/// Mines from a single source node, calling `emit` on every non-empty
/// grafted set. Returns the number of binary-edge selections.
pub fn mine_from_source(
    g: &DataGraph,
    cfg: &MinerConfig,
    source: NodeId,
    mut emit: impl FnMut(GroundPattern),
) -> u64 {
    for pair in double_unary_patterns(source, g) {
        emit(pair);
    }
    let mut rng = source_rng(cfg.seed, source);
    let mut recursions = 0u64;
    let mut stack = vec![Frame {
        node: source,
        depth: 0,
        budget: cfg.paths,
        current: vec![GroundPattern::new()],
        previous: SmallVec::new(),
    }];
    while let Some(frame) = stack.pop() {
        let v = frame.node;
        // Graft unary edges of v: keep each carried pattern, plus one copy per unary.
        let mut grafted = frame.current.clone();
        for pat in &frame.current {
            for &u in g.unary_of(v) {
                if let Some(next) = graft(pat, u) {
                    grafted.push(next);
                }
            }
        }
        grafted.sort_unstable();
        grafted.dedup();
        for pat in grafted.iter().filter(|p| !p.is_empty()) {
            emit(pat.clone());
        }
        if frame.depth >= cfg.depth {
            continue;
        }
        let mut edges: Vec<FactId> =
            g.binary_of(v).iter().copied().filter(|e| !frame.previous.contains(e)).collect();
        if edges.is_empty() {
            continue;
        }
        let next_budget = if frame.budget < edges.len() {
            let mut picked: Vec<usize> = sample(&mut rng, edges.len(), frame.budget).into_vec();
            picked.sort_unstable();
            edges = picked.into_iter().map(|i| edges[i]).collect();
            1
        } else {
            frame.budget.div_ceil(edges.len())
        };
        // Push in reverse so edges are expanded in increasing fact-id order.
        for &e in edges.iter().rev() {
            recursions += 1;
            let fin: Vec<GroundPattern> = grafted.iter().filter_map(|p| graft(p, e)).collect();
            for pat in &fin {
                emit(pat.clone());
            }
            let mut previous = frame.previous.clone();
            previous.push(e);
            stack.push(Frame {
                node: g.other_end(e, v),
                depth: frame.depth + 1,
                budget: next_budget,
                current: fin,
                previous,
            });
        }
    }
    recursions
}

/// Mines every source node in parallel and merges the results.
pub fn mine_patterns(g: &DataGraph, cfg: &MinerConfig) -> Result<PatternStore, MineError> {
    mine_patterns_with_stats(g, cfg).map(|(store, _)| store)
}

pub fn mine_patterns_with_stats(g: &DataGraph, cfg: &MinerConfig) -> Result<(PatternStore, MineStats), MineError> {
    cfg.validate()?;
    let (ground, stats) = (0..g.node_count() as NodeId)
        .into_par_iter()
        .fold(
            || (FxHashSet::<GroundPattern>::default(), MineStats::default()),
            |(mut set, mut stats), v| {
                stats.recursions += mine_from_source(g, cfg, v, |p| {
                    stats.emitted += 1;
                    set.insert(p);
                });
                (set, stats)
            },
        )
        .reduce(
            || (FxHashSet::default(), MineStats::default()),
            |(mut a, sa), (b, sb)| {
                if a.len() < b.len() {
                    return merge(b, a, sb, sa);
                }
                merge(std::mem::take(&mut a), b, sa, sb)
            },
        );
    let store = PatternStore::from_ground_patterns(g, ground, cfg.mode, cfg.node_cap)?;
    Ok((store, stats))
}

fn merge(
    mut big: FxHashSet<GroundPattern>,
    small: FxHashSet<GroundPattern>,
    a: MineStats,
    b: MineStats,
) -> (FxHashSet<GroundPattern>, MineStats) {
    big.extend(small);
    (big, MineStats { recursions: a.recursions + b.recursions, emitted: a.emitted + b.emitted })
}

/// Calls `visit(nodes, edges)` for every edge-distinct path of 1..=`depth`
/// binary edges starting at `source`.
pub fn for_each_trail(g: &DataGraph, source: NodeId, depth: usize, mut visit: impl FnMut(&[NodeId], &[FactId])) {
    fn go(
        g: &DataGraph,
        depth: usize,
        nodes: &mut Vec<NodeId>,
        edges: &mut Vec<FactId>,
        visit: &mut dyn FnMut(&[NodeId], &[FactId]),
    ) {
        if edges.len() == depth {
            return;
        }
        let v = *nodes.last().unwrap();
        for &e in g.binary_of(v) {
            if edges.contains(&e) {
                continue;
            }
            edges.push(e);
            nodes.push(g.other_end(e, v));
            visit(nodes, edges);
            go(g, depth, nodes, edges, visit);
            nodes.pop();
            edges.pop();
        }
    }
    go(g, depth, &mut vec![source], &mut Vec::new(), &mut visit);
}

/// Every ground pattern the walk grammar can produce, without any budget:
/// each path of up to `depth` binary edges, combined with at most one unary
/// fact per visited position, plus all two-unary pairs.
pub fn brute_force_enumerate(
    g: &DataGraph,
    depth: usize,
    mode: SymmetryMode,
    node_cap: usize,
) -> Result<PatternStore, MineError> {
    if g.edge_count() > BRUTE_FORCE_FACT_LIMIT {
        return Err(MineError::TooLarge { facts: g.edge_count(), limit: BRUTE_FORCE_FACT_LIMIT });
    }
    let mut out: FxHashSet<GroundPattern> = FxHashSet::default();
    let with_unaries = |nodes: &[NodeId], edges: &[FactId], out: &mut FxHashSet<GroundPattern>| {
        // Odometer over (no unary | one unary) per position.
        let options: Vec<&[FactId]> = nodes.iter().map(|&v| g.unary_of(v)).collect();
        let mut choice = vec![0usize; nodes.len()];
        loop {
            let mut ids: Vec<FactId> = edges.to_vec();
            for (pos, &c) in choice.iter().enumerate() {
                if c > 0 {
                    ids.push(options[pos][c - 1]);
                }
            }
            ids.sort_unstable();
            ids.dedup();
            if !ids.is_empty() {
                out.insert(GroundPattern::from_vec(ids));
            }
            let mut pos = 0;
            while pos < choice.len() {
                choice[pos] += 1;
                if choice[pos] <= options[pos].len() {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
    };
    for v in 0..g.node_count() as NodeId {
        out.extend(double_unary_patterns(v, g));
        with_unaries(&[v], &[], &mut out);
        for_each_trail(g, v, depth, |nodes, edges| with_unaries(nodes, edges, &mut out));
    }
    Ok(PatternStore::from_ground_patterns(g, out, mode, node_cap)?)
}

/// Smallest path budget that makes every node within `depth` binary steps
/// of every source reachable without sampling: the largest product
/// `|B(v0)| * prod_{j=1}^{l-1} (|B(vj)| - 1)` over all paths, at least 1.
pub fn exhaustive_paths_budget(g: &DataGraph, depth: usize) -> usize {
    let mut best = 1usize;
    for v in 0..g.node_count() as NodeId {
        for_each_trail(g, v, depth, |nodes, _| {
            let mut product = g.binary_of(nodes[0]).len();
            for &w in &nodes[1..nodes.len() - 1] {
                product = product.saturating_mul(g.binary_of(w).len().saturating_sub(1));
            }
            best = best.max(product);
        });
    }
    best
}

/// Upper bound on the number of binary-edge selections made by
/// [`mine_patterns`]: `sum_v min(|B(v)| + sum_{i=1}^{D-1} sum_{v' in N_i(v)} (|B(v')| - 1), N*D)`.
///
/// `N_i(v)` is taken as the multiset of end nodes of the edge-distinct paths
/// of exactly `i` binary edges from `v`, so a node reached along two paths
/// contributes twice, once for each walk that can branch there.
pub fn recursion_bound(g: &DataGraph, depth: usize, paths: usize) -> u64 {
    if depth == 0 {
        return 0;
    }
    let cap = (paths as u64).saturating_mul(depth as u64);
    (0..g.node_count() as NodeId)
        .map(|v| {
            let mut local = g.binary_of(v).len() as u64;
            for_each_trail(g, v, depth - 1, |nodes, _| {
                local += g.binary_of(*nodes.last().unwrap()).len().saturating_sub(1) as u64;
            });
            local.min(cap)
        })
        .sum()
}
