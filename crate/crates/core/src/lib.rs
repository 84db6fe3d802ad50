//! Core machinery for evolving heuristic programs.
//!
//! The [`db`] module holds the island/cluster program database together with
//! the parent-selection and island-reset criteria. [`expr`] is the offline
//! expression language used by the deterministic variation operator,
//! [`variation`] turns parent pairs into new sources, [`eval`] defines the
//! evaluation contract shared by all task harnesses, and [`metrics`] computes
//! the windowed exploitation/exploration diagnostics.

pub mod candidate;
pub mod db;
pub mod eval;
pub mod expr;
pub mod metrics;
pub mod rng;
pub mod serde_float;
pub mod variation;

pub use candidate::{scalarize, Candidate, CandidateId, CandidateKind, NewCandidate};
pub use db::{Criterion, Database, DbError, ParentPair, PriorityConfig, ResetRule};
pub use eval::{Deadline, EvalFailure, EvalOutcome, EvalStatus, Evaluator, FailureKind, TaskHarness};
