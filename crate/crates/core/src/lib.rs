// SPDX-License-Identifier: Apache-2.0

//! Learning ranked Datalog theories from relational facts.
//!
//! The pipeline parses unary and binary facts into a [`data::Database`],
//! indexes them as a [`graph::DataGraph`], mines recurrent ground patterns
//! with bounded random walks, scores the rules those patterns support, and
//! greedily orders the best rules into a theory. [`eval`] ranks entities for
//! knowledge-graph completion queries with a learned theory.

pub mod data;
pub mod error;
pub mod graph;
pub mod pattern;
pub mod rewrite;
pub mod rule;
pub mod miner;
pub mod store;
pub mod utility;
pub mod format;
pub mod learner;
pub mod eval;
pub mod synth;
