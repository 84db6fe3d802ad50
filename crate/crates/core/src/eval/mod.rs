//! Evaluation contract shared by every task.
//!
//! Expression candidates are interpreted in-process inside the task's own
//! scoring loop; external candidates are shipped to a pool of worker
//! processes speaking the framed JSON protocol in [`worker`].

pub mod worker;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::expr::{self, CompiledExpr};
use crate::CandidateKind;

pub use worker::{Frame, WorkerPool, WorkRequest, WorkResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Syntax,
    Runtime,
    Timeout,
    InvalidOutput,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::Syntax => "syntax_error",
            FailureKind::Runtime => "runtime_error",
            FailureKind::Timeout => "timeout",
            FailureKind::InvalidOutput => "invalid_output",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub kind: FailureKind,
    pub message: String,
}

impl EvalFailure {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(FailureKind::InvalidOutput, message)
    }

    pub fn timeout() -> Self {
        Self::new(FailureKind::Timeout, "time limit exceeded")
    }
}

impl fmt::Display for EvalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

impl std::error::Error for EvalFailure {}

/// Coarse status of an outcome, mirroring [`FailureKind`] plus success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    SyntaxError,
    RuntimeError,
    Timeout,
    InvalidOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub result: Result<Vec<f64>, EvalFailure>,
    pub wall_time: Duration,
}

impl EvalOutcome {
    pub fn status(&self) -> EvalStatus {
        match &self.result {
            Ok(_) => EvalStatus::Ok,
            Err(e) => match e.kind {
                FailureKind::Syntax => EvalStatus::SyntaxError,
                FailureKind::Runtime => EvalStatus::RuntimeError,
                FailureKind::Timeout => EvalStatus::Timeout,
                FailureKind::InvalidOutput => EvalStatus::InvalidOutput,
            },
        }
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.result.as_deref().ok()
    }
}

/// Wall-clock limit shared across a whole instance set.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    end: Option<Instant>,
}

impl Deadline {
    pub fn after(limit: Duration) -> Self {
        Self {
            end: Instant::now().checked_add(limit),
        }
    }

    pub fn never() -> Self {
        Self { end: None }
    }

    pub fn expired(&self) -> bool {
        self.end.is_some_and(|e| Instant::now() >= e)
    }

    pub fn check(&self) -> Result<(), EvalFailure> {
        if self.expired() {
            Err(EvalFailure::timeout())
        } else {
            Ok(())
        }
    }
}

/// A task: its instances, how an expression priority is scored on them, and
/// what an external worker needs to do the same.
pub trait TaskHarness: Send + Sync {
    /// Identifier sent to workers (`obp`, `capset`, `tsp`).
    fn task_name(&self) -> &str;

    fn instance_count(&self) -> usize;

    /// Variables an expression candidate may reference.
    fn variables(&self) -> &[&'static str];

    /// One score per instance. Harnesses call `deadline.check()` between
    /// units of work and report NaN priorities as invalid output.
    fn score_expression(&self, f: &CompiledExpr, deadline: &Deadline) -> Result<Vec<f64>, EvalFailure>;

    /// Serialized instances for external workers.
    fn payload(&self) -> serde_json::Value;

    /// The trivial starting candidate.
    fn seed_source(&self, kind: CandidateKind) -> String;

    /// Task-level figures for the final report (excess ratio, set size...).
    fn summarize(&self, scores: &[f64]) -> BTreeMap<String, f64>;
}

/// Dispatches candidates to the interpreter or to the worker pool and
/// enforces the per-task timeout and arity law.
pub struct Evaluator {
    harness: Arc<dyn TaskHarness>,
    timeout: Duration,
    max_depth: usize,
    workers: Option<Arc<WorkerPool>>,
    payload: Option<Arc<serde_json::Value>>,
}

impl Evaluator {
    pub fn new(harness: Arc<dyn TaskHarness>, timeout: Duration) -> Self {
        Self {
            harness,
            timeout,
            max_depth: expr::DEFAULT_MAX_DEPTH,
            workers: None,
            payload: None,
        }
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn with_workers(mut self, pool: Arc<WorkerPool>) -> Self {
        self.payload = Some(Arc::new(self.harness.payload()));
        self.workers = Some(pool);
        self
    }

    pub fn harness(&self) -> &Arc<dyn TaskHarness> {
        &self.harness
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn evaluate(&self, source: &str, kind: CandidateKind) -> EvalOutcome {
        let start = Instant::now();
        let result = match kind {
            CandidateKind::Expression => self.run_expression(source),
            CandidateKind::External => self.run_external(source),
        }
        .and_then(|scores| self.check_arity(scores));
        EvalOutcome {
            result,
            wall_time: start.elapsed(),
        }
    }

    fn run_expression(&self, source: &str) -> Result<Vec<f64>, EvalFailure> {
        let deadline = Deadline::after(self.timeout);
        let tree = expr::parse(source).map_err(|e| EvalFailure::new(FailureKind::Syntax, e.to_string()))?;
        if tree.depth() > self.max_depth {
            return Err(EvalFailure::new(
                FailureKind::Syntax,
                format!("depth {} exceeds limit {}", tree.depth(), self.max_depth),
            ));
        }
        let compiled = CompiledExpr::compile(&tree, self.harness.variables())
            .map_err(|e| EvalFailure::new(FailureKind::Syntax, e.to_string()))?;
        let scores = self.harness.score_expression(&compiled, &deadline)?;
        deadline.check()?;
        Ok(scores)
    }

    fn run_external(&self, source: &str) -> Result<Vec<f64>, EvalFailure> {
        let (Some(pool), Some(payload)) = (&self.workers, &self.payload) else {
            return Err(EvalFailure::new(FailureKind::Runtime, "no worker pool configured"));
        };
        pool.evaluate(source, self.harness.task_name(), payload, self.timeout)
    }

    fn check_arity(&self, scores: Vec<f64>) -> Result<Vec<f64>, EvalFailure> {
        let expected = self.harness.instance_count();
        if scores.len() != expected {
            return Err(EvalFailure::invalid(format!(
                "expected {expected} scores, got {}",
                scores.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(EvalFailure::invalid(format!("score {i} is not finite")));
        }
        Ok(scores)
    }
}
