use serde::{Deserialize, Serialize};

pub type CandidateId = u64;

/// How a candidate's source is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    /// Built-in expression language, interpreted in process.
    Expression,
    /// Guest-language function body, executed by an external worker.
    External,
}

/// A registered, evaluated heuristic program. Immutable once registered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub source: String,
    pub kind: CandidateKind,
    pub score_vector: Vec<f64>,
    pub score: f64,
    pub length_chars: usize,
    pub parent_ids: Vec<CandidateId>,
    pub birth_step: u64,
}

/// An evaluated program that has not been assigned an id yet.
#[derive(Debug, Clone, PartialEq)]
pub struct NewCandidate {
    pub source: String,
    pub kind: CandidateKind,
    pub score_vector: Vec<f64>,
    pub parent_ids: Vec<CandidateId>,
}

impl NewCandidate {
    pub fn seed(source: impl Into<String>, kind: CandidateKind, score_vector: Vec<f64>) -> Self {
        Self {
            source: source.into(),
            kind,
            score_vector,
            parent_ids: Vec::new(),
        }
    }

    pub(crate) fn into_candidate(self, id: CandidateId, birth_step: u64) -> Candidate {
        Candidate {
            id,
            length_chars: self.source.chars().count(),
            score: scalarize(&self.score_vector),
            source: self.source,
            kind: self.kind,
            score_vector: self.score_vector,
            parent_ids: self.parent_ids,
            birth_step,
        }
    }
}

/// Scalar fitness of a score vector: the arithmetic mean of its entries.
pub fn scalarize(score_vector: &[f64]) -> f64 {
    if score_vector.is_empty() {
        return 0.0;
    }
    score_vector.iter().sum::<f64>() / score_vector.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_counts_chars_not_bytes() {
        let c = NewCandidate::seed("λ+1", CandidateKind::Expression, vec![1.0, 3.0]).into_candidate(0, 1);
        assert_eq!(c.length_chars, 3);
        assert_eq!(c.score, 2.0);
        assert!(c.parent_ids.is_empty());
    }
}
