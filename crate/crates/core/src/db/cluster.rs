use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::Candidate;

/// Hashable form of a score vector. `-0.0` and `0.0` map to the same key so
/// that grouping follows numeric equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignatureKey(Vec<u64>);

impl SignatureKey {
    pub fn of(scores: &[f64]) -> Self {
        SignatureKey(
            scores
                .iter()
                .map(|&x| if x == 0.0 { 0 } else { x.to_bits() })
                .collect(),
        )
    }
}

/// Candidates of one island sharing an identical score vector, plus the
/// bandit statistics used by the priority criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub signature: Vec<f64>,
    pub members: Vec<Candidate>,
    pub score: f64,
    /// Number of selection events that drew a parent from this cluster.
    pub n_selected: u64,
    pub offspring_score_sum: f64,
    pub offspring_count: u64,
    /// Database-wide creation order.
    pub seq: u64,
}

impl Cluster {
    pub(crate) fn empty(signature: Vec<f64>, seq: u64) -> Self {
        Self {
            score: crate::scalarize(&signature),
            signature,
            members: Vec::new(),
            n_selected: 0,
            offspring_score_sum: 0.0,
            offspring_count: 0,
            seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Island {
    pub id: usize,
    pub clusters: Vec<Cluster>,
    pub created_at_step: u64,
    #[serde(skip)]
    pub(crate) index: HashMap<SignatureKey, usize>,
}

impl Island {
    pub(crate) fn new(id: usize, created_at_step: u64) -> Self {
        Self {
            id,
            clusters: Vec::new(),
            created_at_step,
            index: HashMap::new(),
        }
    }

    pub fn cluster_of(&self, scores: &[f64]) -> Option<&Cluster> {
        self.index.get(&SignatureKey::of(scores)).map(|&i| &self.clusters[i])
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.clusters.iter().flat_map(|c| c.members.iter())
    }

    pub fn candidate_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    pub fn best_score(&self) -> f64 {
        self.clusters
            .iter()
            .map(|c| c.score)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (SignatureKey::of(&c.signature), i))
            .collect();
    }

    pub(crate) fn clear(&mut self, step: u64) {
        self.clusters.clear();
        self.index.clear();
        self.created_at_step = step;
    }
}
