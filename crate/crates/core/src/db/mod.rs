//! The program database: islands of clusters of candidates.
//!
//! Clusters group candidates whose per-instance score vectors are exactly
//! equal. Parent selection and island reset rank clusters by a configurable
//! priority criterion (see [`Criterion`]).

mod cluster;
mod criterion;
mod database;
mod reset;

pub use cluster::{Cluster, Island, SignatureKey};
pub use criterion::{quality, uiq, uiq_value, Criterion, PriorityConfig, ResetRule};
pub use database::{length_weights, sample_weighted, softmax_weights, Database, ParentPair, Registration};
pub use reset::{below_median, lowest_half};

use thiserror::Error;

use crate::CandidateId;

#[derive(Debug, Error, PartialEq)]
pub enum DbError {
    #[error("unknown island {0}")]
    UnknownIsland(usize),
    #[error("score vector has {got} entries, harness has {expected} instances")]
    ArityMismatch { expected: usize, got: usize },
    #[error("score vector entry {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("island {0} has no candidates")]
    EmptyIsland(usize),
    #[error("candidate {0} is not in the database")]
    UnknownCandidate(CandidateId),
    #[error("invalid priority configuration: {0}")]
    InvalidConfig(String),
}
