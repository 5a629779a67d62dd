// SPDX-License-Identifier: Apache-2.0

use relrules::error::{DataError, EvalError, LearnError, MineError, PatternError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::RewriteSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<PatternError> for CliError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::RuleSyntax { .. } | PatternError::Invalid(_) => CliError::Io(e.to_string()),
            PatternError::CanonicalizationOverflow { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<MineError> for CliError {
    fn from(e: MineError) -> Self {
        match e {
            MineError::Config(_) => CliError::Config(e.to_string()),
            MineError::Pattern(p) => p.into(),
            MineError::TooLarge { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Config(_) => CliError::Config(e.to_string()),
            LearnError::EmptyDatabase => CliError::Io("no facts parsed".into()),
            LearnError::Mine(m) => m.into(),
            LearnError::Pattern(p) => p.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) => CliError::Config(e.to_string()),
            EvalError::EmptyTestSet | EvalError::UnknownPredicate(_) => CliError::Io(e.to_string()),
            EvalError::Data(d) => d.into(),
            EvalError::Pattern(p) => p.into(),
        }
    }
}
