// SPDX-License-Identifier: Apache-2.0

//! Variable-level patterns: conjunctions of atoms viewed as labelled graphs.
//!
//! Canonical keys are computed by exhaustive minimisation over slot
//! renumberings. Mined patterns are path-shaped with at most `D + 1`
//! variables, so the search is tiny; a configurable node cap guards against
//! anything larger.

use std::fmt;

use crate::data::{Fact, NodeId, PredId, SymbolTable, Terms};
use crate::error::PatternError;

pub type Var = u8;

/// Default upper bound on the number of variables a pattern may have.
pub const DEFAULT_NODE_CAP: usize = 8;

/// How binary edges are compared when matching patterns.
///
/// `Ordered` respects argument order (`p(X,Y)` differs from `p(Y,X)`).
/// `Unordered` treats a binary edge as the node set `{X,Y}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryMode {
    #[default]
    Unordered,
    Ordered,
}

impl std::str::FromStr for SymmetryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unordered" => Ok(SymmetryMode::Unordered),
            "ordered" => Ok(SymmetryMode::Ordered),
            other => Err(format!("unknown symmetry mode `{other}`")),
        }
    }
}

impl fmt::Display for SymmetryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetryMode::Unordered => "unordered",
            SymmetryMode::Ordered => "ordered",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Args {
    One(Var),
    Two(Var, Var),
}

impl Args {
    pub fn contains(self, v: Var) -> bool {
        match self {
            Args::One(a) => a == v,
            Args::Two(a, b) => a == v || b == v,
        }
    }

    pub fn map(self, f: impl Fn(Var) -> Var) -> Args {
        match self {
            Args::One(a) => Args::One(f(a)),
            Args::Two(a, b) => Args::Two(f(a), f(b)),
        }
    }

    pub fn vars(self) -> impl Iterator<Item = Var> {
        let (a, b) = match self {
            Args::One(a) => (a, None),
            Args::Two(a, b) => (a, Some(b)),
        };
        std::iter::once(a).chain(b)
    }

    fn normalized(self, mode: SymmetryMode) -> Args {
        match (self, mode) {
            (Args::Two(a, b), SymmetryMode::Unordered) if b < a => Args::Two(b, a),
            (args, _) => args,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: PredId,
    pub args: Args,
}

impl Atom {
    pub fn unary(pred: PredId, v: Var) -> Self {
        Atom { pred, args: Args::One(v) }
    }

    pub fn binary(pred: PredId, a: Var, b: Var) -> Self {
        Atom { pred, args: Args::Two(a, b) }
    }

    pub fn is_unary(&self) -> bool {
        matches!(self.args, Args::One(_))
    }

    /// Does this atom match the fact's predicate and endpoints under `assign`?
    pub fn matches_fact(&self, fact: &Fact, assign: &[NodeId], mode: SymmetryMode) -> bool {
        if self.pred != fact.pred {
            return false;
        }
        match (self.args, fact.terms) {
            (Args::One(a), Terms::Unary(x)) => assign[a as usize] == x,
            (Args::Two(a, b), Terms::Binary(x, y)) => {
                let (ca, cb) = (assign[a as usize], assign[b as usize]);
                (ca == x && cb == y) || (mode == SymmetryMode::Unordered && ca == y && cb == x)
            }
            _ => false,
        }
    }

    pub fn render(&self, names: &SymbolTable) -> String {
        let name = names.name(self.pred);
        match self.args {
            Args::One(a) => format!("{name}(V{a})"),
            Args::Two(a, b) => format!("{name}(V{a},V{b})"),
        }
    }
}

/// A conjunction of atoms over variable slots `0..var_count`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    var_count: u8,
    atoms: Vec<Atom>,
}

impl Pattern {
    /// Builds a pattern, checking that every slot is in range and used, and
    /// that no atom repeats.
    pub fn new(var_count: usize, atoms: Vec<Atom>) -> Result<Self, PatternError> {
        if var_count > Var::MAX as usize {
            return Err(PatternError::Invalid(format!("{var_count} variables is too many")));
        }
        let mut used = vec![false; var_count];
        for atom in &atoms {
            for v in atom.args.vars() {
                let slot = used
                    .get_mut(v as usize)
                    .ok_or_else(|| PatternError::Invalid(format!("slot V{v} out of range")))?;
                *slot = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(PatternError::Invalid(format!("slot V{v} is unused")));
        }
        let mut sorted = atoms.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(PatternError::Invalid("duplicate atom".into()));
        }
        Ok(Pattern { var_count: var_count as u8, atoms })
    }

    /// Renumbers the slots used by `atoms` densely, in increasing order of
    /// their current ids.
    pub fn compact(atoms: &[Atom]) -> Result<Self, PatternError> {
        let mut used: Vec<Var> = atoms.iter().flat_map(|a| a.args.vars()).collect();
        used.sort_unstable();
        used.dedup();
        let remap = |v: Var| used.binary_search(&v).unwrap() as Var;
        let atoms = atoms.iter().map(|a| Atom { pred: a.pred, args: a.args.map(remap) }).collect();
        Pattern::new(used.len(), atoms)
    }

    /// The pattern of a set of facts: each distinct constant becomes a slot,
    /// numbered by first appearance. Also returns the slot-to-constant table.
    pub fn from_facts<'a>(facts: impl IntoIterator<Item = &'a Fact>) -> (Pattern, Vec<NodeId>) {
        let mut consts: Vec<NodeId> = Vec::new();
        let mut slot = |c: NodeId| -> Var {
            match consts.iter().position(|&x| x == c) {
                Some(i) => i as Var,
                None => {
                    consts.push(c);
                    (consts.len() - 1) as Var
                }
            }
        };
        let atoms = facts
            .into_iter()
            .map(|f| match f.terms {
                Terms::Unary(a) => Atom::unary(f.pred, slot(a)),
                Terms::Binary(a, b) => {
                    let a = slot(a);
                    Atom::binary(f.pred, a, slot(b))
                }
            })
            .collect();
        (Pattern { var_count: consts.len() as u8, atoms }, consts)
    }

    pub fn var_count(&self) -> usize {
        self.var_count as usize
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Applies `perm[old] = new` to every slot, keeping atom order.
    pub fn relabel(&self, perm: &[Var]) -> Pattern {
        Pattern {
            var_count: self.var_count,
            atoms: self.atoms.iter().map(|a| Atom { pred: a.pred, args: a.args.map(|v| perm[v as usize]) }).collect(),
        }
    }

    pub fn is_connected(&self) -> bool {
        atoms_connected(&self.atoms)
    }

    /// `p(V0,V1) & q(V1)` with atoms sorted by (name, slots).
    pub fn render(&self, names: &SymbolTable) -> String {
        let mut parts: Vec<(&str, Args)> = self.atoms.iter().map(|a| (names.name(a.pred), a.args)).collect();
        parts.sort();
        parts
            .iter()
            .map(|(n, args)| match args {
                Args::One(a) => format!("{n}(V{a})"),
                Args::Two(a, b) => format!("{n}(V{a},V{b})"),
            })
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

pub(crate) fn atoms_connected(atoms: &[Atom]) -> bool {
    if atoms.len() <= 1 {
        return true;
    }
    let mut reached = vec![false; atoms.len()];
    let mut stack = vec![0];
    reached[0] = true;
    while let Some(i) = stack.pop() {
        for (j, other) in atoms.iter().enumerate() {
            if !reached[j] && atoms[i].args.vars().any(|v| other.args.contains(v)) {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// Canonical byte key of a pattern: equal for isomorphic patterns only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternKey(Box<[u8]>);

impl PatternKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// Result of canonicalisation: the key plus the renumbering `perm[old] = new`
/// that brings the input into canonical slot order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    pub key: PatternKey,
    pub perm: Vec<Var>,
}

type Code = (u32, u8, u8, u8);

fn atom_code(atom: &Atom, perm: &[Var], mode: SymmetryMode) -> Code {
    match atom.args.map(|v| perm[v as usize]).normalized(mode) {
        Args::One(a) => (atom.pred, 1, a, 0),
        Args::Two(a, b) => (atom.pred, 2, a, b),
    }
}

/// Calls `visit` with every permutation of `0..n` (Heap's algorithm).
pub(crate) fn for_each_permutation(n: usize, mut visit: impl FnMut(&[Var])) {
    let mut perm: Vec<Var> = (0..n as Var).collect();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

pub fn canonical_form(p: &Pattern, mode: SymmetryMode, node_cap: usize) -> Result<CanonicalForm, PatternError> {
    let n = p.var_count();
    if n > node_cap {
        return Err(PatternError::CanonicalizationOverflow { vars: n, cap: node_cap });
    }
    let mut best: Option<(Vec<Code>, Vec<Var>)> = None;
    let mut codes: Vec<Code> = Vec::with_capacity(p.len());
    for_each_permutation(n, |perm| {
        codes.clear();
        codes.extend(p.atoms.iter().map(|a| atom_code(a, perm, mode)));
        codes.sort_unstable();
        let better = match &best {
            None => true,
            Some((b, _)) => codes < *b,
        };
        if better {
            best = Some((codes.clone(), perm.to_vec()));
        }
    });
    let (codes, perm) = best.unwrap_or_default();
    let mut bytes = Vec::with_capacity(2 + codes.len() * 7);
    bytes.push(n as u8);
    bytes.push(match mode {
        SymmetryMode::Unordered => 0,
        SymmetryMode::Ordered => 1,
    });
    for (pred, tag, a, b) in codes {
        bytes.extend_from_slice(&pred.to_le_bytes());
        bytes.extend_from_slice(&[tag, a, b]);
    }
    Ok(CanonicalForm { key: PatternKey(bytes.into_boxed_slice()), perm })
}

pub fn canonical_key(p: &Pattern, mode: SymmetryMode, node_cap: usize) -> Result<PatternKey, PatternError> {
    canonical_form(p, mode, node_cap).map(|f| f.key)
}

/// Is there a slot bijection mapping the atoms of `p1` onto those of `p2`?
///
/// Backtracking search, independent of [`canonical_key`].
pub fn isomorphic(p1: &Pattern, p2: &Pattern, mode: SymmetryMode) -> bool {
    if p1.len() != p2.len() || p1.var_count() != p2.var_count() {
        return false;
    }
    let mut preds1: Vec<(PredId, bool)> = p1.atoms.iter().map(|a| (a.pred, a.is_unary())).collect();
    let mut preds2: Vec<(PredId, bool)> = p2.atoms.iter().map(|a| (a.pred, a.is_unary())).collect();
    preds1.sort_unstable();
    preds2.sort_unstable();
    if preds1 != preds2 {
        return false;
    }
    let target: Vec<Atom> = p2.atoms.iter().map(|a| Atom { pred: a.pred, args: a.args.normalized(mode) }).collect();
    let mut map: Vec<Option<Var>> = vec![None; p1.var_count()];
    let mut taken = vec![false; p2.var_count()];
    iso_extend(&p1.atoms, 0, &target, mode, &mut map, &mut taken)
}

fn iso_extend(
    src: &[Atom],
    idx: usize,
    target: &[Atom],
    mode: SymmetryMode,
    map: &mut [Option<Var>],
    taken: &mut [bool],
) -> bool {
    let Some(atom) = src.get(idx) else {
        return true;
    };
    let vars: Vec<Var> = atom.args.vars().collect();
    let unbound: Vec<Var> = {
        let mut u: Vec<Var> = vars.iter().copied().filter(|&v| map[v as usize].is_none()).collect();
        u.dedup();
        u
    };
    for candidate in target.iter().filter(|t| t.pred == atom.pred && t.is_unary() == atom.is_unary()) {
        // Try every way of binding the unbound slots to the candidate's endpoints.
        let ends: Vec<Var> = candidate.args.vars().collect();
        let choices: Vec<Vec<Var>> = match unbound.len() {
            0 => vec![vec![]],
            1 => ends.iter().map(|&e| vec![e]).collect(),
            _ => vec![vec![ends[0], ends[1]], vec![ends[1], ends[0]]],
        };
        for choice in choices {
            if choice.iter().any(|&t| taken[t as usize]) || (choice.len() == 2 && choice[0] == choice[1]) {
                continue;
            }
            for (&v, &t) in unbound.iter().zip(&choice) {
                map[v as usize] = Some(t);
                taken[t as usize] = true;
            }
            let image = Atom { pred: atom.pred, args: atom.args.map(|v| map[v as usize].unwrap()).normalized(mode) };
            if image == *candidate && iso_extend(src, idx + 1, target, mode, map, taken) {
                return true;
            }
            for (&v, &t) in unbound.iter().zip(&choice) {
                map[v as usize] = None;
                taken[t as usize] = false;
            }
        }
    }
    false
}
