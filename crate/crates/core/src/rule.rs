// SPDX-License-Identifier: Apache-2.0

//! Rules extracted from patterns: one atom is the head, the rest the body.

use std::collections::BTreeMap;

use crate::data::{Arity, Database, PredId, SymbolTable};
use crate::error::PatternError;
use crate::pattern::{atoms_connected, for_each_permutation, isomorphic, Args, Atom, Pattern, SymmetryMode, Var};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pattern: Pattern,
    head: usize,
}

/// Mode-aware identity of a rule up to variable renaming.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleKey(Box<[u8]>);

impl Rule {
    pub fn new(pattern: Pattern, head: usize) -> Result<Self, PatternError> {
        if head >= pattern.len() {
            return Err(PatternError::Invalid(format!("head index {head} out of range")));
        }
        if pattern.len() < 2 {
            return Err(PatternError::Invalid("rule body is empty".into()));
        }
        Ok(Rule { pattern, head })
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn head_index(&self) -> usize {
        self.head
    }

    pub fn head(&self) -> Atom {
        self.pattern.atoms()[self.head]
    }

    pub fn body_atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.pattern.atoms().iter().enumerate().filter(move |(i, _)| *i != self.head).map(|(_, a)| a)
    }

    /// The body as a standalone pattern, slots renumbered densely.
    pub fn body(&self) -> Pattern {
        let atoms: Vec<Atom> = self.body_atoms().copied().collect();
        Pattern::compact(&atoms).expect("sub-pattern of a valid pattern")
    }

    /// Number of atoms in body and head together.
    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_safe(&self) -> bool {
        self.head().args.vars().all(|v| self.body_atoms().any(|a| a.args.contains(v)))
    }

    pub fn is_term_constrained(&self) -> bool {
        (0..self.pattern.var_count() as Var)
            .all(|v| self.pattern.atoms().iter().filter(|a| a.args.contains(v)).count() >= 2)
    }

    pub fn is_body_connected(&self) -> bool {
        let body: Vec<Atom> = self.body_atoms().copied().collect();
        atoms_connected(&body)
    }

    /// Renders the rule as `body & ... -> head` with its current slot names.
    pub fn text(&self, names: &SymbolTable) -> String {
        let mut body: Vec<(&str, Args)> = self.body_atoms().map(|a| (names.name(a.pred), a.args)).collect();
        body.sort();
        let body: Vec<String> = body.into_iter().map(|(n, args)| render(n, args)).collect();
        let head = self.head();
        format!("{} -> {}", body.join(" & "), render(names.name(head.pred), head.args))
    }

    /// Renames slots so the text is minimal: head first, then the sorted body,
    /// compared by (predicate name, slot tuple). Atoms come out as the sorted
    /// body followed by the head.
    pub fn canonical(&self, names: &SymbolTable) -> Rule {
        type Item<'a> = (&'a str, Args);
        let head = self.head();
        let body: Vec<Atom> = self.body_atoms().copied().collect();
        let mut best: Option<(Item, Vec<Item>, Vec<Var>)> = None;
        for_each_permutation(self.pattern.var_count(), |perm| {
            let h = (names.name(head.pred), head.args.map(|v| perm[v as usize]));
            if let Some((bh, _, _)) = &best {
                if h > *bh {
                    return;
                }
            }
            let mut b: Vec<Item> =
                body.iter().map(|a| (names.name(a.pred), a.args.map(|v| perm[v as usize]))).collect();
            b.sort();
            let better = match &best {
                None => true,
                Some((bh, bb, _)) => (h, &b) < (*bh, bb),
            };
            if better {
                best = Some((h, b, perm.to_vec()));
            }
        });
        let (_, _, perm) = best.expect("at least one permutation");
        let relabelled = self.pattern.relabel(&perm);
        let head_atom = relabelled.atoms()[self.head];
        let mut atoms: Vec<Atom> =
            relabelled.atoms().iter().enumerate().filter(|(i, _)| *i != self.head).map(|(_, a)| *a).collect();
        atoms.sort_by(|x, y| (names.name(x.pred), x.args).cmp(&(names.name(y.pred), y.args)));
        atoms.push(head_atom);
        let head = atoms.len() - 1;
        Rule { pattern: Pattern::new(relabelled.var_count(), atoms).expect("relabelling keeps validity"), head }
    }

    /// Key equal for two rules iff a slot renaming maps one onto the other
    /// (heads to heads), comparing binary atoms according to `mode`.
    pub fn key(&self, mode: SymmetryMode) -> RuleKey {
        let code = |a: &Atom, perm: &[Var]| -> (u32, u8, u8, u8) {
            match a.args.map(|v| perm[v as usize]) {
                Args::One(x) => (a.pred, 1, x, 0),
                Args::Two(x, y) if mode == SymmetryMode::Unordered && y < x => (a.pred, 2, y, x),
                Args::Two(x, y) => (a.pred, 2, x, y),
            }
        };
        let head = self.head();
        let body: Vec<Atom> = self.body_atoms().copied().collect();
        let mut best: Option<Vec<(u32, u8, u8, u8)>> = None;
        for_each_permutation(self.pattern.var_count(), |perm| {
            let mut codes: Vec<_> = body.iter().map(|a| code(a, perm)).collect();
            codes.sort_unstable();
            codes.insert(0, code(&head, perm));
            if best.as_ref().is_none_or(|b| codes < *b) {
                best = Some(codes);
            }
        });
        let mut bytes = vec![self.pattern.var_count() as u8, mode as u8];
        for (p, t, a, b) in best.unwrap_or_default() {
            bytes.extend_from_slice(&p.to_le_bytes());
            bytes.extend_from_slice(&[t, a, b]);
        }
        RuleKey(bytes.into_boxed_slice())
    }
}

fn render(name: &str, args: Args) -> String {
    match args {
        Args::One(a) => format!("{name}(V{a})"),
        Args::Two(a, b) => format!("{name}(V{a},V{b})"),
    }
}

/// Each slot lies in at most two binary atoms and at most one unary atom,
/// except for the pattern made of exactly two unary atoms on one slot.
pub fn satisfies_shape_restriction(p: &Pattern) -> bool {
    if p.var_count() == 1 && p.len() == 2 && p.atoms().iter().all(Atom::is_unary) {
        return true;
    }
    (0..p.var_count() as Var).all(|v| {
        let (mut unary, mut binary) = (0, 0);
        for a in p.atoms().iter().filter(|a| a.args.contains(v)) {
            if a.is_unary() {
                unary += 1;
            } else {
                binary += 1;
            }
        }
        unary <= 1 && binary <= 2
    })
}

/// Number of atom subsets of the rule pattern, of the body's size, that are
/// isomorphic to the body. Always at least 1.
pub fn symmetry_factor(rule: &Rule, mode: SymmetryMode) -> u32 {
    let body = rule.body();
    let atoms = rule.pattern().atoms();
    // The body has one atom fewer than the rule, so each subset leaves out one atom.
    (0..atoms.len())
        .filter(|&skip| {
            let subset: Vec<Atom> = atoms.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, a)| *a).collect();
            let sub = Pattern::compact(&subset).expect("sub-pattern of a valid pattern");
            isomorphic(&sub, &body, mode)
        })
        .count() as u32
}

/// Every admissible rule with this pattern as its rule pattern, one per
/// distinct rule under `mode`, in canonical form and sorted by text.
///
/// A head choice is admissible when the body is non-empty and connected,
/// every head slot occurs in the body, and every slot occurs in at least two
/// atoms; the pattern itself must satisfy [`satisfies_shape_restriction`].
pub fn enumerate_rules(p: &Pattern, names: &SymbolTable, mode: SymmetryMode) -> Vec<(Rule, String)> {
    if p.len() < 2 || !satisfies_shape_restriction(p) {
        return Vec::new();
    }
    let mut found: BTreeMap<RuleKey, (Rule, String)> = BTreeMap::new();
    for head in 0..p.len() {
        let rule = Rule { pattern: p.clone(), head };
        if !(rule.is_safe() && rule.is_term_constrained() && rule.is_body_connected()) {
            continue;
        }
        let canon = rule.canonical(names);
        let text = canon.text(names);
        let key = canon.key(mode);
        match found.get(&key) {
            Some((_, existing)) if *existing <= text => {}
            _ => {
                found.insert(key, (canon, text));
            }
        }
    }
    let mut out: Vec<(Rule, String)> = found.into_values().collect();
    out.sort_by(|a, b| a.1.cmp(&b.1));
    out
}

/// Parses `p(X,Y) & q(Y) -> r(X)`. Variable names are arbitrary identifiers,
/// numbered by first appearance; predicates must exist in `db` with matching arity.
pub fn parse_rule(text: &str, db: &Database) -> Result<Rule, PatternError> {
    let err = |reason: &str| PatternError::RuleSyntax { text: text.to_owned(), reason: reason.to_owned() };
    let (body, head) = text.split_once("->").ok_or_else(|| err("missing `->`"))?;
    let mut vars: Vec<String> = Vec::new();
    let mut atoms = Vec::new();
    let body_parts: Vec<&str> = body.split('&').map(str::trim).collect();
    for part in body_parts.iter().copied().chain(std::iter::once(head.trim())) {
        let open = part.find('(').ok_or_else(|| err("atom without `(`"))?;
        let inner = part[open + 1..].strip_suffix(')').ok_or_else(|| err("atom without closing `)`"))?;
        let name = part[..open].trim();
        let pred: PredId = db.predicate_id(name).ok_or_else(|| err(&format!("unknown predicate `{name}`")))?;
        let mut slots = Vec::new();
        for arg in inner.split(',').map(str::trim) {
            if arg.is_empty() {
                return Err(err("empty argument"));
            }
            let idx = match vars.iter().position(|v| v == arg) {
                Some(i) => i,
                None => {
                    vars.push(arg.to_owned());
                    vars.len() - 1
                }
            };
            slots.push(idx as Var);
        }
        let atom = match (slots.as_slice(), db.arity(pred)) {
            ([a], Arity::Unary) => Atom::unary(pred, *a),
            ([a, b], Arity::Binary) => Atom::binary(pred, *a, *b),
            _ => return Err(err(&format!("wrong number of arguments for `{name}`"))),
        };
        atoms.push(atom);
    }
    if body_parts.iter().any(|p| p.is_empty()) {
        return Err(err("empty body atom"));
    }
    let head_index = atoms.len() - 1;
    let pattern = Pattern::new(vars.len(), atoms).map_err(|e| err(&e.to_string()))?;
    Rule::new(pattern, head_index).map_err(|e| err(&e.to_string()))
}
