// SPDX-License-Identifier: Apache-2.0

//! Categorical-to-unary rewriting.
//!
//! A binary fact `p(x, c)` whose second argument is a category becomes the
//! unary fact `p@c(x)`, so rules can be learned per category value. The
//! returned [`CategoryMapping`] translates learned rules back.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::data::{Arity, Database, RawFact, Terms};
use crate::error::DataError;

/// Which argument of a binary predicate holds the category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CategoryEndpoint {
    Subject,
    Object,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RewriteSpec {
    pub entries: Vec<(String, CategoryEndpoint)>,
}

impl RewriteSpec {
    /// Parses `predicate=subject|object` lines; `#` comments and blanks are skipped.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, DataError> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (pred, side) = line.split_once('=').ok_or_else(|| {
                DataError::RewriteSpec(format!("line {}: expected `predicate=subject|object`", idx + 1))
            })?;
            let side = match side.trim() {
                "subject" => CategoryEndpoint::Subject,
                "object" => CategoryEndpoint::Object,
                other => {
                    return Err(DataError::RewriteSpec(format!(
                        "line {}: unknown endpoint `{other}`",
                        idx + 1
                    )))
                }
            };
            entries.push((pred.trim().to_owned(), side));
        }
        Ok(RewriteSpec { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CategoryEntry {
    pub original: String,
    pub category: String,
    pub derived: String,
    pub endpoint: CategoryEndpoint,
}

/// Table of `(original predicate, category constant) <-> derived predicate`.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CategoryMapping {
    pub entries: Vec<CategoryEntry>,
}

pub fn derived_name(original: &str, category: &str) -> String {
    format!("{original}@{category}")
}

impl CategoryMapping {
    pub fn lookup(&self, derived: &str) -> Option<&CategoryEntry> {
        self.entries.iter().find(|e| e.derived == derived)
    }

    /// Rewrites unary atoms of derived predicates inside rule text back to
    /// the original binary form, e.g. `HasCat@3(V0)` to `HasCat(V0,3)`.
    pub fn restore_rule_text(&self, text: &str) -> String {
        let by_name: BTreeMap<&str, &CategoryEntry> =
            self.entries.iter().map(|e| (e.derived.as_str(), e)).collect();
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(open) = rest.find('(') {
            let close = match rest[open..].find(')') {
                Some(c) => open + c,
                None => break,
            };
            let head = &rest[..open];
            // The predicate name starts after the last separator in `head`.
            let start = head.rfind([' ', '&', '>']).map_or(0, |i| i + 1);
            let name = &head[start..];
            let args = &rest[open + 1..close];
            out.push_str(&head[..start]);
            match by_name.get(name) {
                Some(e) if !args.contains(',') => {
                    let restored = match e.endpoint {
                        CategoryEndpoint::Object => format!("{}({},{})", e.original, args, e.category),
                        CategoryEndpoint::Subject => format!("{}({},{})", e.original, e.category, args),
                    };
                    out.push_str(&restored);
                }
                _ => out.push_str(&rest[start..=close]),
            }
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        out
    }

    /// Writes the table as TSV: original, category, derived.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(out, "{}\t{}\t{}", e.original, e.category, e.derived)?;
        }
        Ok(())
    }
}

/// Replaces every fact of each listed predicate by a unary fact on its
/// non-category endpoint. Other facts keep their relative order.
pub fn rewrite_categoricals(
    db: &Database,
    spec: &RewriteSpec,
) -> Result<(Database, CategoryMapping), DataError> {
    let mut listed = BTreeMap::new();
    for (name, side) in &spec.entries {
        let pred = db
            .predicate_id(name)
            .ok_or_else(|| DataError::RewriteSpec(format!("predicate `{name}` is not in the data")))?;
        if db.arity(pred) != Arity::Binary {
            return Err(DataError::RewriteSpec(format!("predicate `{name}` is not binary")));
        }
        listed.insert(pred, *side);
    }
    if listed.is_empty() {
        return Ok((db.clone(), CategoryMapping::default()));
    }

    let mut out = Database::new();
    let mut mapping = CategoryMapping::default();
    let mut seen = BTreeMap::new();
    for fact in db.facts() {
        let name = db.predicate_name(fact.pred);
        match (listed.get(&fact.pred), fact.terms) {
            (Some(side), Terms::Binary(a, b)) => {
                let (item, cat) = match side {
                    CategoryEndpoint::Object => (a, b),
                    CategoryEndpoint::Subject => (b, a),
                };
                let category = db.constant_name(cat);
                let derived = derived_name(name, category);
                if db.predicate_id(&derived).is_some() {
                    return Err(DataError::RewriteSpec(format!(
                        "derived predicate `{derived}` collides with an existing predicate"
                    )));
                }
                if seen.insert((fact.pred, cat), ()).is_none() {
                    mapping.entries.push(CategoryEntry {
                        original: name.to_owned(),
                        category: category.to_owned(),
                        derived: derived.clone(),
                        endpoint: *side,
                    });
                }
                out.add(&derived, &[db.constant_name(item)])?;
            }
            (_, Terms::Unary(a)) => {
                out.add(name, &[db.constant_name(a)])?;
            }
            (_, Terms::Binary(a, b)) => {
                out.add(name, &[db.constant_name(a), db.constant_name(b)])?;
            }
        }
    }
    Ok((out, mapping))
}

/// Applies the same rewriting to unparsed facts, e.g. a held-out test file.
/// Facts of listed predicates that are not binary are left unchanged.
pub fn rewrite_raw_facts(raw: &[RawFact], spec: &RewriteSpec) -> Vec<RawFact> {
    raw.iter()
        .map(|r| match spec.entries.iter().find(|(name, _)| *name == r.predicate) {
            Some((name, side)) if r.args.len() == 2 => {
                let (item, cat) = match side {
                    CategoryEndpoint::Object => (&r.args[0], &r.args[1]),
                    CategoryEndpoint::Subject => (&r.args[1], &r.args[0]),
                };
                RawFact { line: r.line, predicate: derived_name(name, cat), args: vec![item.clone()] }
            }
            _ => r.clone(),
        })
        .collect()
}
