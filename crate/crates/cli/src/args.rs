// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use relrules::data::{FormatConfig, Layout};
use relrules::eval::Direction;
use relrules::learner::BudgetFormula;
use relrules::pattern::SymmetryMode;
use relrules::utility::{ComplexityExponent, PriorFamily};

#[derive(Debug, Parser)]
#[command(name = "relrules", version, about = "Learn and evaluate ranked Datalog theories from relational facts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Learn a theory from training facts.
    Learn(LearnArgs),
    /// Score a theory on held-out facts (knowledge-graph completion).
    Eval(EvalArgs),
    /// Mine ground patterns and report the recursion count against its bound.
    Mine(MineArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Unordered,
    Ordered,
}

impl From<ModeArg> for SymmetryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Unordered => SymmetryMode::Unordered,
            ModeArg::Ordered => SymmetryMode::Ordered,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutArg {
    /// subject, relation, object
    Sro,
    /// subject, object, relation
    Sor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetArg {
    Practical,
    WorstCase,
}

impl From<BudgetArg> for BudgetFormula {
    fn from(b: BudgetArg) -> Self {
        match b {
            BudgetArg::Practical => BudgetFormula::Practical,
            BudgetArg::WorstCase => BudgetFormula::WorstCase,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorArg {
    Typed,
    Arity,
}

impl From<PriorArg> for PriorFamily {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Typed => PriorFamily::Typed,
            PriorArg::Arity => PriorFamily::Arity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentArg {
    Group,
    Theory,
}

impl From<ExponentArg> for ComplexityExponent {
    fn from(e: ExponentArg) -> Self {
        match e {
            ExponentArg::Group => ComplexityExponent::GroupSize,
            ExponentArg::Theory => ComplexityExponent::TheorySize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionArg {
    Tail,
    Head,
    Both,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Tail => Direction::Tail,
            DirectionArg::Head => Direction::Head,
            DirectionArg::Both => Direction::Both,
        }
    }
}

/// Input format and worker settings shared by every command.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// Directory for all outputs (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; falls back to RELRULES_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Field separator of fact files.
    #[arg(long, default_value_t = '\t')]
    pub separator: char,
    #[arg(long, value_enum, default_value_t = LayoutArg::Sro)]
    pub layout: LayoutArg,
    /// Rewrite spec: `predicate=subject|object` lines naming categorical endpoints.
    #[arg(long)]
    pub rewrite_spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Unordered)]
    pub symmetry_mode: ModeArg,
}

impl Common {
    pub fn format(&self) -> FormatConfig {
        let layout = match self.layout {
            LayoutArg::Sro => Layout::SubjectRelationObject,
            LayoutArg::Sor => Layout::SubjectObjectRelation,
        };
        FormatConfig { separator: self.separator, layout }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct LearnArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Maximum theory size [default: 30].
    #[arg(long, conflicts_with = "m_per_relation")]
    pub m: Option<usize>,
    /// Theory size as a multiple of the number of predicates.
    #[arg(long)]
    pub m_per_relation: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Paths per node; overrides the budget formula.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, value_enum, default_value_t = BudgetArg::Practical)]
    pub budget: BudgetArg,
    /// Pattern-count estimate for the worst-case budget (default: pilot run).
    #[arg(long)]
    pub pattern_estimate: Option<f64>,
    #[arg(long, value_enum, default_value_t = PriorArg::Typed)]
    pub prior_family: PriorArg,
    #[arg(long, value_enum, default_value_t = ExponentArg::Group)]
    pub complexity_exponent: ExponentArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub theory: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    pub hits: Vec<usize>,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    pub direction: DirectionArg,
    /// Rank against all candidates instead of removing other true facts.
    #[arg(long)]
    pub no_filter: bool,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct MineArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the reproduced outputs (default: the recorded directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}
