// SPDX-License-Identifier: Apache-2.0

//! Dictionary-encoded relational databases of unary and binary facts.
//!
//! Constants and predicates are interned into dense ids in first-appearance
//! order. Every hot path downstream works on ids; names only matter at I/O
//! boundaries.

use std::collections::hash_map::Entry;
use std::fmt;
use std::io::{BufRead, Write};

use rustc_hash::FxHashMap;

use crate::error::DataError;

pub type NodeId = u32;
pub type PredId = u32;
pub type FactId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arity {
    Unary,
    Binary,
}

impl Arity {
    pub fn as_usize(self) -> usize {
        match self {
            Arity::Unary => 1,
            Arity::Binary => 2,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_usize())
    }
}

/// Endpoint tuple of a fact. Binary endpoints are ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Terms {
    Unary(NodeId),
    Binary(NodeId, NodeId),
}

impl Terms {
    pub fn arity(self) -> Arity {
        match self {
            Terms::Unary(_) => Arity::Unary,
            Terms::Binary(..) => Arity::Binary,
        }
    }

    pub fn contains(self, node: NodeId) -> bool {
        match self {
            Terms::Unary(a) => a == node,
            Terms::Binary(a, b) => a == node || b == node,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub pred: PredId,
    pub terms: Terms,
}

impl Fact {
    pub fn unary(pred: PredId, node: NodeId) -> Self {
        Fact { pred, terms: Terms::Unary(node) }
    }

    pub fn binary(pred: PredId, subject: NodeId, object: NodeId) -> Self {
        Fact { pred, terms: Terms::Binary(subject, object) }
    }

    pub fn is_loop(&self) -> bool {
        matches!(self.terms, Terms::Binary(a, b) if a == b)
    }
}

/// Bidirectional string interner with dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
    ids: FxHashMap<String, u32>,
}

impl SymbolTable {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (i as u32, n.as_str()))
    }
}

/// A set of facts over interned constants and predicates.
///
/// Insertion is idempotent: re-inserting a stored fact returns its existing id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    constants: SymbolTable,
    predicates: SymbolTable,
    arities: Vec<Arity>,
    facts: Vec<Fact>,
    index: FxHashMap<Fact, FactId>,
    counts: Vec<usize>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_constant(&mut self, name: &str) -> NodeId {
        self.constants.intern(name)
    }

    /// Interns a predicate, checking that it keeps a single arity.
    pub fn intern_predicate(&mut self, name: &str, arity: Arity) -> Result<PredId, DataError> {
        if let Some(id) = self.predicates.get(name) {
            let declared = self.arities[id as usize];
            if declared != arity {
                return Err(DataError::ArityConflict {
                    predicate: name.to_owned(),
                    declared: declared.as_usize(),
                    found: arity.as_usize(),
                });
            }
            return Ok(id);
        }
        let id = self.predicates.intern(name);
        self.arities.push(arity);
        self.counts.push(0);
        Ok(id)
    }

    /// Inserts a fact over existing ids. Returns the fact id and whether it was new.
    pub fn insert(&mut self, fact: Fact) -> Result<(FactId, bool), DataError> {
        let declared = *self
            .arities
            .get(fact.pred as usize)
            .ok_or(DataError::UnknownPredicateId(fact.pred))?;
        if declared != fact.terms.arity() {
            return Err(DataError::ArityConflict {
                predicate: self.predicates.name(fact.pred).to_owned(),
                declared: declared.as_usize(),
                found: fact.terms.arity().as_usize(),
            });
        }
        let n = self.constants.len() as u32;
        let in_range = match fact.terms {
            Terms::Unary(a) => a < n,
            Terms::Binary(a, b) => a < n && b < n,
        };
        if !in_range {
            return Err(DataError::UnknownConstantId);
        }
        match self.index.entry(fact) {
            Entry::Occupied(e) => Ok((*e.get(), false)),
            Entry::Vacant(e) => {
                let id = self.facts.len() as FactId;
                e.insert(id);
                self.facts.push(fact);
                self.counts[fact.pred as usize] += 1;
                Ok((id, true))
            }
        }
    }

    /// Interns names and inserts `pred(args..)`; `args` must hold one or two constants.
    pub fn add(&mut self, pred: &str, args: &[&str]) -> Result<(FactId, bool), DataError> {
        let fact = match *args {
            [a] => {
                let p = self.intern_predicate(pred, Arity::Unary)?;
                Fact::unary(p, self.intern_constant(a))
            }
            [a, b] => {
                let p = self.intern_predicate(pred, Arity::Binary)?;
                let a = self.intern_constant(a);
                let b = self.intern_constant(b);
                Fact::binary(p, a, b)
            }
            _ => return Err(DataError::BadArity(args.len())),
        };
        self.insert(fact)
    }

    pub fn constants(&self) -> &SymbolTable {
        &self.constants
    }

    pub fn predicates(&self) -> &SymbolTable {
        &self.predicates
    }

    pub fn num_constants(&self) -> usize {
        self.constants.len()
    }

    pub fn num_predicates(&self) -> usize {
        self.predicates.len()
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn fact(&self, id: FactId) -> Fact {
        self.facts[id as usize]
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn fact_id(&self, fact: &Fact) -> Option<FactId> {
        self.index.get(fact).copied()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.index.contains_key(fact)
    }

    pub fn arity(&self, pred: PredId) -> Arity {
        self.arities[pred as usize]
    }

    /// Number of stored facts of `pred`.
    pub fn count(&self, pred: PredId) -> usize {
        self.counts[pred as usize]
    }

    pub fn predicate_name(&self, pred: PredId) -> &str {
        self.predicates.name(pred)
    }

    pub fn constant_name(&self, node: NodeId) -> &str {
        self.constants.name(node)
    }

    pub fn predicate_id(&self, name: &str) -> Option<PredId> {
        self.predicates.get(name)
    }

    pub fn constant_id(&self, name: &str) -> Option<NodeId> {
        self.constants.get(name)
    }

    /// Renders one fact in TSV layout (`subject TAB relation [TAB object]`).
    pub fn fact_to_tsv(&self, fact: &Fact) -> String {
        let pred = self.predicate_name(fact.pred);
        match fact.terms {
            Terms::Unary(a) => format!("{}\t{}", self.constant_name(a), pred),
            Terms::Binary(a, b) => {
                format!("{}\t{}\t{}", self.constant_name(a), pred, self.constant_name(b))
            }
        }
    }

    /// Renders one fact as `pred(a[,b])`.
    pub fn fact_to_atom(&self, fact: &Fact) -> String {
        let pred = self.predicate_name(fact.pred);
        match fact.terms {
            Terms::Unary(a) => format!("{}({})", pred, self.constant_name(a)),
            Terms::Binary(a, b) => {
                format!("{}({},{})", pred, self.constant_name(a), self.constant_name(b))
            }
        }
    }

    /// Writes every fact in fact-id order using the default TSV layout.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for fact in &self.facts {
            writeln!(out, "{}", self.fact_to_tsv(fact))?;
        }
        Ok(())
    }
}

/// Column order of a fact line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Layout {
    /// `subject SEP relation SEP object`; two fields mean `subject SEP relation`.
    #[default]
    SubjectRelationObject,
    /// `subject SEP object SEP relation`; two fields still mean `subject SEP relation`.
    SubjectObjectRelation,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FormatConfig {
    pub separator: char,
    pub layout: Layout,
}

impl Default for FormatConfig {
    fn default() -> Self {
        FormatConfig { separator: '\t', layout: Layout::default() }
    }
}

/// One parsed line before interning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawFact {
    pub line: usize,
    pub predicate: String,
    pub args: Vec<String>,
}

/// Reads fact lines without interning. Blank lines and `#` comments are skipped.
pub fn read_raw_facts<R: BufRead>(reader: R, format: &FormatConfig) -> Result<Vec<RawFact>, DataError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(format.separator).map(str::trim).collect();
        if fields.iter().any(|f| f.is_empty()) {
            return Err(DataError::Malformed { line: lineno, fields: fields.len() });
        }
        let raw = match (fields.len(), format.layout) {
            (2, _) => RawFact {
                line: lineno,
                predicate: fields[1].to_owned(),
                args: vec![fields[0].to_owned()],
            },
            (3, Layout::SubjectRelationObject) => RawFact {
                line: lineno,
                predicate: fields[1].to_owned(),
                args: vec![fields[0].to_owned(), fields[2].to_owned()],
            },
            (3, Layout::SubjectObjectRelation) => RawFact {
                line: lineno,
                predicate: fields[2].to_owned(),
                args: vec![fields[0].to_owned(), fields[1].to_owned()],
            },
            (n, _) => return Err(DataError::Malformed { line: lineno, fields: n }),
        };
        out.push(raw);
    }
    Ok(out)
}

/// Parses a fact stream into a fresh database. Duplicate lines are dropped.
pub fn parse_facts<R: BufRead>(reader: R, format: &FormatConfig) -> Result<Database, DataError> {
    let mut db = Database::new();
    for raw in read_raw_facts(reader, format)? {
        let args: Vec<&str> = raw.args.iter().map(String::as_str).collect();
        db.add(&raw.predicate, &args).map_err(|e| e.at_line(raw.line))?;
    }
    Ok(db)
}
