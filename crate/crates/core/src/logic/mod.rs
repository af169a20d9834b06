//! Temporal and first-order properties of runs.

pub mod fo;
pub mod mc;
pub mod parser;
pub mod pltl;

pub use fo::{eval_fo, Fo};
pub use mc::{mc_all_fo, mc_all_pltl, mc_fo, mc_pltl, McOptions, McOutcome, Universal};
pub use parser::{parse_fo, parse_pltl};
pub use pltl::{eval_pltl, Pltl};

use crate::solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum LogicError {
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("variable {0} is free at top level")]
    FreeVariable(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
