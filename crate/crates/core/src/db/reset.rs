
use super::criterion::{PriorityConfig, ResetRule};
use super::database::best_cluster;
use super::Database;

impl Database {
    /// Clears underperforming islands and reseeds each from a uniformly
    /// chosen surviving island. Returns the ids of the reset islands in
    /// ascending order. A single-island database is never reset.
    pub fn reset_islands(&mut self, cfg: &PriorityConfig, rng: &mut impl rand::Rng) -> Vec<usize> {
        let n = self.islands().len();
        if n < 2 {
            return Vec::new();
        }
        let t = self.t().max(1);
        let targets = match cfg.reset_rule() {
            ResetRule::Median => {
                let values: Vec<f64> = self.islands().iter().map(|i| island_value(i, cfg, t)).collect();
                below_median(&values)
            }
            ResetRule::LowestHalf => {
                let scores: Vec<f64> = self.islands().iter().map(|i| i.best_score()).collect();
                lowest_half(&scores, rng)
            }
        };
        if targets.is_empty() {
            return targets;
        }
        let survivors: Vec<usize> = (0..n).filter(|i| !targets.contains(i)).collect();

        for &island in &targets {
            let donor = survivors[rng.random_range(0..survivors.len())];
            let donor_island = &self.islands()[donor];
            let source = match cfg.reset_rule() {
                ResetRule::Median => {
                    let cluster = &donor_island.clusters[best_cluster(&donor_island.clusters, cfg, t)];
                    cluster.members[rng.random_range(0..cluster.members.len())].clone()
                }
                ResetRule::LowestHalf => {
                    // best-scoring cluster, oldest member
                    let by_score = PriorityConfig {
                        criterion: super::Criterion::ScoreSoftmax,
                        ..cfg.clone()
                    };
                    let cluster = &donor_island.clusters[best_cluster(&donor_island.clusters, &by_score, t)];
                    cluster.members[0].clone()
                }
            };
            self.clear_island(island);
            self.reseed(island, &source);
        }
        targets
    }
}

/// Highest cluster value on an island.
pub(crate) fn island_value(island: &super::Island, cfg: &PriorityConfig, t: u64) -> f64 {
    island
        .clusters
        .iter()
        .map(|c| cfg.cluster_value(c, t))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Indexes whose value is strictly below the median of `values`.
pub fn below_median(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("island values are never NaN"));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (lo, hi) = (sorted[n / 2 - 1], sorted[n / 2]);
        if lo == hi {
            lo
        } else {
            (lo + hi) / 2.0
        }
    };
    (0..values.len()).filter(|&i| values[i] < median).collect()
}

/// The `floor(n / 2)` lowest-scoring indexes, ties broken at random.
pub fn lowest_half(scores: &[f64], rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut order: Vec<(f64, u64, usize)> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, rng.random::<u64>(), i))
        .collect();
    order.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("island scores are never NaN")
            .then(a.1.cmp(&b.1))
    });
    let mut out: Vec<usize> = order[..scores.len() / 2].iter().map(|x| x.2).collect();
    out.sort_unstable();
    out
}
