//! Task harnesses: online bin packing, cap sets over Z3^n, and TSP guided
//! local search. Each exposes its combinatorial core as plain functions and
//! a [`TaskHarness`](heurevo_core::TaskHarness) that scores expression
//! candidates on a fixed instance set.

pub mod capset;
pub mod obp;
pub mod tsp;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl TaskError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        TaskError::Parse {
            line,
            message: message.into(),
        }
    }
}

pub use capset::CapsetHarness;
pub use obp::ObpHarness;
pub use tsp::TspHarness;
