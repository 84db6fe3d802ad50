use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::Cluster;

/// Ranking rule used for parent selection and (by default) island reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Top-2 clusters by uncertainty-inclusive quality.
    Qutc,
    /// Top-2 clusters by mean offspring score.
    QualityOnly,
    /// Candidates sampled with probability proportional to `exp(score)`.
    ScoreSoftmax,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Qutc => "qutc",
            Criterion::QualityOnly => "quality_only",
            Criterion::ScoreSoftmax => "score_softmax",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qutc" => Ok(Criterion::Qutc),
            "quality_only" => Ok(Criterion::QualityOnly),
            "score_softmax" => Ok(Criterion::ScoreSoftmax),
            other => Err(format!("unknown criterion `{other}`")),
        }
    }
}

/// Which islands get cleared at a reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetRule {
    /// Islands whose best cluster value is strictly below the median.
    Median,
    /// The lowest half of islands by best candidate score.
    LowestHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    pub criterion: Criterion,
    /// Exploration coefficient of the uncertainty bonus.
    pub k: f64,
    /// Temperature of the within-cluster length weighting.
    pub t_prog: f64,
    /// Overrides the reset rule implied by `criterion`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset: Option<ResetRule>,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Qutc,
            k: 0.0008,
            t_prog: 1.0,
            reset: None,
        }
    }
}

impl PriorityConfig {
    pub fn new(criterion: Criterion, k: f64, t_prog: f64) -> Self {
        Self {
            criterion,
            k,
            t_prog,
            reset: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(format!("k must be a finite nonnegative number, got {}", self.k));
        }
        if !(self.t_prog > 0.0 && self.t_prog.is_finite()) {
            return Err(format!("t_prog must be positive, got {}", self.t_prog));
        }
        Ok(())
    }

    pub fn reset_rule(&self) -> ResetRule {
        self.reset.unwrap_or(match self.criterion {
            Criterion::Qutc | Criterion::QualityOnly => ResetRule::Median,
            Criterion::ScoreSoftmax => ResetRule::LowestHalf,
        })
    }

    /// The value a cluster is ranked by under this configuration at step `t`.
    pub fn cluster_value(&self, cluster: &Cluster, t: u64) -> f64 {
        match self.criterion {
            Criterion::Qutc => uiq(cluster, t, self.k),
            Criterion::QualityOnly => quality(cluster),
            Criterion::ScoreSoftmax => cluster.score,
        }
    }
}

/// Mean score of all offspring bred from members of `cluster`, falling back
/// to the cluster's own score before any offspring exist.
pub fn quality(cluster: &Cluster) -> f64 {
    if cluster.offspring_count > 0 {
        cluster.offspring_score_sum / cluster.offspring_count as f64
    } else {
        cluster.score
    }
}

/// Quality plus the UCB-style bonus `k * sqrt(ln t / N)`; unvisited clusters
/// get `+inf` whenever `k > 0`.
pub fn uiq(cluster: &Cluster, t: u64, k: f64) -> f64 {
    debug_assert!(t >= 1, "uiq needs t >= 1");
    uiq_value(quality(cluster), t as f64, cluster.n_selected, k)
}

/// `q + k * sqrt(ln t / n)` over a real-valued step; `+inf` when `n = 0`
/// and `k > 0`, exactly `q` when `k = 0`.
pub fn uiq_value(q: f64, t: f64, n: u64, k: f64) -> f64 {
    if k == 0.0 {
        return q;
    }
    if n == 0 {
        return f64::INFINITY;
    }
    q + k * (t.ln() / n as f64).sqrt()
}

/// Total order on (cluster, value) pairs; `Greater` means higher priority.
///
/// Equal values fall back to the higher cluster score. Remaining ties go to
/// the newest cluster among infinite values and to the oldest otherwise.
pub(crate) fn rank(a: (&Cluster, f64), b: (&Cluster, f64)) -> Ordering {
    let (ca, va) = a;
    let (cb, vb) = b;
    va.partial_cmp(&vb)
        .unwrap_or(Ordering::Equal)
        .then_with(|| ca.score.partial_cmp(&cb.score).unwrap_or(Ordering::Equal))
        .then_with(|| {
            if va.is_infinite() {
                ca.seq.cmp(&cb.seq)
            } else {
                cb.seq.cmp(&ca.seq)
            }
        })
}
