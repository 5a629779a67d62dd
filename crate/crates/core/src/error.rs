// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: expected 2 or 3 non-empty fields, found {fields}")]
    Malformed { line: usize, fields: usize },
    #[error("predicate `{predicate}` has arity {declared} but is used with arity {found}")]
    ArityConflict { predicate: String, declared: usize, found: usize },
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<DataError> },
    #[error("unknown predicate id {0}")]
    UnknownPredicateId(u32),
    #[error("fact refers to a constant id that was never interned")]
    UnknownConstantId,
    #[error("facts take one or two arguments, got {0}")]
    BadArity(usize),
    #[error("rewrite spec: {0}")]
    RewriteSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    pub(crate) fn at_line(self, line: usize) -> DataError {
        match self {
            e @ (DataError::Malformed { .. } | DataError::AtLine { .. } | DataError::Io(_)) => e,
            e => DataError::AtLine { line, source: Box::new(e) },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("pattern has {vars} variables, canonicalization is capped at {cap}")]
    CanonicalizationOverflow { vars: usize, cap: usize },
    #[error("invalid pattern: {0}")]
    Invalid(String),
    #[error("cannot parse rule `{text}`: {reason}")]
    RuleSyntax { text: String, reason: String },
}

#[derive(Debug, Error)]
pub enum MineError {
    #[error("graph has {facts} facts, brute-force enumeration is limited to {limit}")]
    TooLarge { facts: usize, limit: usize },
    #[error("invalid miner config: {0}")]
    Config(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UtilityError {
    #[error("rule body has no groundings in the store; precision is undefined")]
    UndefinedPrecision,
    #[error("rule pattern is not in the store")]
    MissingRulePattern,
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("invalid learner config: {0}")]
    Config(String),
    #[error("database has no facts")]
    EmptyDatabase,
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("test fact uses predicate `{0}` unknown to the training data")]
    UnknownPredicate(String),
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}
