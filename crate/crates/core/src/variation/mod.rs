//! Variation operators: turn a selected parent pair into new sources.
//!
//! [`StubOperator`] mutates expression-language parents offline and is fully
//! determined by its rng. [`LlmOperator`] renders a task prompt with both
//! parents and asks a chat-completion endpoint for completions.

mod extract;
mod llm;
mod prompt;
mod stub;

pub use extract::{extract_function, ExtractError};
pub use llm::{EndpointConfig, LlmCounters, LlmOperator};
pub use prompt::{indent_body, PromptTemplate};
pub use stub::StubOperator;

use crate::rng::Rng;
use crate::{CandidateKind, ParentPair};

/// Sampling settings of one selection event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub n_samples: usize,
    pub top_p: f64,
    pub temperature: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            n_samples: 4,
            top_p: 0.95,
            temperature: 1.0,
        }
    }
}

impl Sampling {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_samples == 0 {
            return Err("n_samples must be at least 1".into());
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must lie in (0, 1], got {}", self.top_p));
        }
        if !(self.temperature >= 0.0) {
            return Err(format!("temperature must be non-negative, got {}", self.temperature));
        }
        Ok(())
    }
}

/// Result of one proposal call. `dropped` counts samples lost to transport
/// or extraction failures; they never reach evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Proposals {
    pub sources: Vec<String>,
    pub dropped: usize,
}

pub trait VariationOperator: Send + Sync {
    /// Kind of candidate this operator emits.
    fn kind(&self) -> CandidateKind;

    /// Up to `sampling.n_samples` sources bred from `parents`
    /// (`parents.first` plays v0, `parents.second` v1).
    fn propose(&self, parents: &ParentPair, sampling: &Sampling, rng: &mut Rng) -> Proposals;
}
