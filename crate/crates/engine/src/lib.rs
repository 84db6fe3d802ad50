//! Evolution driver: configuration, the sampler/evaluator loop, snapshots,
//! reports and sweeps.

pub mod config;
pub mod engine;
pub mod plot;
pub mod report;
pub mod setup;
pub mod snapshot;
pub mod sweep;

pub use config::{ConfigError, OperatorKind, RunConfig, TaskKind};
pub use engine::{Counters, Engine, Pending, RunState};
pub use report::RunReport;
pub use snapshot::Snapshot;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("task setup failed: {0}")]
    Task(String),
    #[error("seed candidate cannot be evaluated: {0}")]
    Seed(String),
    #[error(transparent)]
    Db(#[from] heurevo_core::DbError),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
