use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize};

use super::cluster::{Cluster, Island, SignatureKey};
use super::criterion::{rank, Criterion, PriorityConfig};
use super::DbError;
use crate::{Candidate, CandidateId, NewCandidate};

/// Outcome of [`Database::register`].
#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub id: CandidateId,
    pub signature: Vec<f64>,
    pub new_cluster: bool,
}

/// Two parents for one variation step, lower-priority parent first.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentPair {
    pub island: usize,
    pub first: Candidate,
    pub second: Candidate,
}

impl ParentPair {
    pub fn ids(&self) -> Vec<CandidateId> {
        vec![self.first.id, self.second.id]
    }
}

/// Multi-island program database.
///
/// All mutation goes through `&mut self`; the engine wraps the database in
/// a single lock, which makes selection and registration atomic.
#[derive(Debug, Clone, Serialize)]
pub struct Database {
    islands: Vec<Island>,
    instance_count: usize,
    t: u64,
    next_id: CandidateId,
    next_cluster_seq: u64,
    #[serde(skip)]
    locator: HashMap<CandidateId, (usize, usize)>,
}

impl Database {
    /// An empty database of `islands` islands whose candidates all carry
    /// `instance_count` scores.
    pub fn new(islands: usize, instance_count: usize) -> Self {
        Self {
            islands: (0..islands).map(|id| Island::new(id, 0)).collect(),
            instance_count,
            t: 0,
            next_id: 0,
            next_cluster_seq: 0,
            locator: HashMap::new(),
        }
    }

    /// Global step: number of registered candidates across all islands.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn islands(&self) -> &[Island] {
        &self.islands
    }

    pub fn island(&self, id: usize) -> Result<&Island, DbError> {
        self.islands.get(id).ok_or(DbError::UnknownIsland(id))
    }

    pub fn instance_count(&self) -> usize {
        self.instance_count
    }

    pub fn candidate(&self, id: CandidateId) -> Option<&Candidate> {
        let &(island, cluster) = self.locator.get(&id)?;
        self.islands[island].clusters[cluster]
            .members
            .iter()
            .find(|c| c.id == id)
    }

    pub fn cluster_of_candidate(&self, id: CandidateId) -> Option<&Cluster> {
        let &(island, cluster) = self.locator.get(&id)?;
        Some(&self.islands[island].clusters[cluster])
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.islands.iter().flat_map(|i| i.candidates())
    }

    /// Best live candidate; ties go to the lowest id.
    pub fn best_candidate(&self) -> Option<&Candidate> {
        self.candidates().fold(None, |best: Option<&Candidate>, c| match best {
            Some(b) if b.score > c.score || (b.score == c.score && b.id < c.id) => Some(b),
            _ => Some(c),
        })
    }

    /// Adds an evaluated candidate to `island`, creating its cluster when
    /// needed, advancing `t` and crediting each distinct listed parent's
    /// cluster with the candidate's score.
    pub fn register(&mut self, island: usize, cand: NewCandidate) -> Result<Registration, DbError> {
        if island >= self.islands.len() {
            return Err(DbError::UnknownIsland(island));
        }
        if cand.score_vector.len() != self.instance_count {
            return Err(DbError::ArityMismatch {
                expected: self.instance_count,
                got: cand.score_vector.len(),
            });
        }
        if let Some(index) = cand.score_vector.iter().position(|x| !x.is_finite()) {
            return Err(DbError::NonFiniteScore { index });
        }

        self.t += 1;
        let id = self.next_id;
        self.next_id += 1;
        let candidate = cand.into_candidate(id, self.t);

        let mut credited: Vec<CandidateId> = Vec::with_capacity(candidate.parent_ids.len());
        for &parent in &candidate.parent_ids {
            if credited.contains(&parent) {
                continue;
            }
            credited.push(parent);
            // Parents wiped by a reset in the meantime are skipped.
            if let Some(&(pi, pc)) = self.locator.get(&parent) {
                let cluster = &mut self.islands[pi].clusters[pc];
                cluster.offspring_score_sum += candidate.score;
                cluster.offspring_count += 1;
            }
        }

        let (cluster_index, new_cluster) = self.insert(island, candidate);
        let signature = self.islands[island].clusters[cluster_index].signature.clone();
        Ok(Registration {
            id,
            signature,
            new_cluster,
        })
    }

    /// Places `candidate` into its cluster without touching `t` or credits.
    fn insert(&mut self, island: usize, candidate: Candidate) -> (usize, bool) {
        let key = SignatureKey::of(&candidate.score_vector);
        let isl = &mut self.islands[island];
        let (index, created) = match isl.index.get(&key) {
            Some(&i) => (i, false),
            None => {
                let i = isl.clusters.len();
                isl.clusters
                    .push(Cluster::empty(candidate.score_vector.clone(), self.next_cluster_seq));
                self.next_cluster_seq += 1;
                isl.index.insert(key, i);
                (i, true)
            }
        };
        self.locator.insert(candidate.id, (island, index));
        isl.clusters[index].members.push(candidate);
        (index, created)
    }

    /// Copies `source` into `island` as a fresh parentless candidate. Does
    /// not advance `t`.
    pub(crate) fn reseed(&mut self, island: usize, source: &Candidate) -> CandidateId {
        let id = self.next_id;
        self.next_id += 1;
        let copy = Candidate {
            id,
            parent_ids: Vec::new(),
            birth_step: self.t,
            ..source.clone()
        };
        self.insert(island, copy);
        id
    }

    pub(crate) fn clear_island(&mut self, island: usize) {
        for cand in self.islands[island].candidates() {
            self.locator.remove(&cand.id);
        }
        let t = self.t;
        self.islands[island].clear(t);
    }

    /// Uniformly random island id.
    pub fn choose_island(&self, rng: &mut impl rand::Rng) -> usize {
        rng.random_range(0..self.islands.len())
    }

    /// Picks two parents from `island` under `cfg` and records the
    /// selection on the chosen clusters.
    pub fn select_parents(
        &mut self,
        island: usize,
        cfg: &PriorityConfig,
        rng: &mut impl rand::Rng,
    ) -> Result<ParentPair, DbError> {
        let t = self.t.max(1);
        let isl = self
            .islands
            .get_mut(island)
            .ok_or(DbError::UnknownIsland(island))?;
        if isl.clusters.is_empty() {
            return Err(DbError::EmptyIsland(island));
        }

        let (first, second, touched) = match cfg.criterion {
            Criterion::Qutc | Criterion::QualityOnly => {
                let ranked = top_two(&isl.clusters, cfg, t);
                match ranked {
                    (best, Some(runner_up)) => {
                        let a = pick_member(&isl.clusters[runner_up], cfg.t_prog, None, rng);
                        let b = pick_member(&isl.clusters[best], cfg.t_prog, None, rng);
                        let a = isl.clusters[runner_up].members[a].clone();
                        let b = isl.clusters[best].members[b].clone();
                        (a, b, vec![runner_up, best])
                    }
                    (only, None) => {
                        let cluster = &isl.clusters[only];
                        let a = pick_member(cluster, cfg.t_prog, None, rng);
                        let b = if cluster.members.len() > 1 {
                            pick_member(cluster, cfg.t_prog, Some(a), rng)
                        } else {
                            a
                        };
                        (cluster.members[a].clone(), cluster.members[b].clone(), vec![only])
                    }
                }
            }
            Criterion::ScoreSoftmax => {
                let flat: Vec<(usize, usize)> = isl
                    .clusters
                    .iter()
                    .enumerate()
                    .flat_map(|(ci, c)| (0..c.members.len()).map(move |mi| (ci, mi)))
                    .collect();
                let scores: Vec<f64> = flat
                    .iter()
                    .map(|&(ci, mi)| isl.clusters[ci].members[mi].score)
                    .collect();
                let weights = softmax_weights(&scores, 1.0);
                let i = sample_weighted(&weights, None, rng);
                let j = if flat.len() > 1 {
                    sample_weighted(&weights, Some(i), rng)
                } else {
                    i
                };
                let (ci, mi) = flat[i];
                let (cj, mj) = flat[j];
                let a = isl.clusters[ci].members[mi].clone();
                let b = isl.clusters[cj].members[mj].clone();
                let mut touched = vec![ci];
                if cj != ci {
                    touched.push(cj);
                }
                if a.score <= b.score {
                    (a, b, touched)
                } else {
                    (b, a, touched)
                }
            }
        };

        for ci in touched {
            isl.clusters[ci].n_selected += 1;
        }
        Ok(ParentPair {
            island,
            first,
            second,
        })
    }

    /// Indexes of every candidate location; used after deserialization.
    fn rebuild_indexes(&mut self) {
        self.locator.clear();
        for (ii, island) in self.islands.iter_mut().enumerate() {
            island.rebuild_index();
            for (ci, cluster) in island.clusters.iter().enumerate() {
                for m in &cluster.members {
                    self.locator.insert(m.id, (ii, ci));
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn islands_mut(&mut self) -> &mut [Island] {
        &mut self.islands
    }

    /// Checks structural invariants; used by tests and snapshot loading.
    pub fn check_invariants(&self) -> Result<(), String> {
        let total: usize = self.islands.iter().map(Island::candidate_count).sum();
        if total != self.locator.len() {
            return Err(format!("locator has {} entries for {total} candidates", self.locator.len()));
        }
        for island in &self.islands {
            let mut seen = std::collections::HashSet::new();
            for cluster in &island.clusters {
                if !seen.insert(SignatureKey::of(&cluster.signature)) {
                    return Err(format!("duplicate cluster signature on island {}", island.id));
                }
                for m in &cluster.members {
                    if SignatureKey::of(&m.score_vector) != SignatureKey::of(&cluster.signature) {
                        return Err(format!("candidate {} in wrong cluster", m.id));
                    }
                    if m.score_vector.len() != self.instance_count {
                        return Err(format!("candidate {} has wrong arity", m.id));
                    }
                }
            }
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for Database {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            islands: Vec<Island>,
            instance_count: usize,
            t: u64,
            next_id: CandidateId,
            next_cluster_seq: u64,
        }
        let raw = Raw::deserialize(deserializer)?;
        let mut db = Database {
            islands: raw.islands,
            instance_count: raw.instance_count,
            t: raw.t,
            next_id: raw.next_id,
            next_cluster_seq: raw.next_cluster_seq,
            locator: HashMap::new(),
        };
        db.rebuild_indexes();
        db.check_invariants().map_err(serde::de::Error::custom)?;
        Ok(db)
    }
}

/// Indexes of the highest and second-highest ranked clusters.
pub(crate) fn top_two(clusters: &[Cluster], cfg: &PriorityConfig, t: u64) -> (usize, Option<usize>) {
    let values: Vec<f64> = clusters.iter().map(|c| cfg.cluster_value(c, t)).collect();
    let mut best = 0;
    let mut second: Option<usize> = None;
    for i in 1..clusters.len() {
        let cand = (&clusters[i], values[i]);
        if rank(cand, (&clusters[best], values[best])).is_gt() {
            second = Some(best);
            best = i;
        } else if second.is_none_or(|s| rank(cand, (&clusters[s], values[s])).is_gt()) {
            second = Some(i);
        }
    }
    (best, second)
}

/// Index of the single best cluster under `cfg`.
pub(crate) fn best_cluster(clusters: &[Cluster], cfg: &PriorityConfig, t: u64) -> usize {
    top_two(clusters, cfg, t).0
}

/// Within-cluster weights `exp(l~ / T)` with
/// `l~ = (max_len - len) / (min_len + 1e-6)`; shorter programs are favoured.
pub fn length_weights(lengths: &[usize], t_prog: f64) -> Vec<f64> {
    let max = lengths.iter().copied().max().unwrap_or(0) as f64;
    let min = lengths.iter().copied().min().unwrap_or(0) as f64;
    let normalized: Vec<f64> = lengths
        .iter()
        .map(|&l| (max - l as f64) / (min + 1e-6))
        .collect();
    softmax_weights(&normalized, t_prog)
}

/// Unnormalized `exp(x / temperature)`, shifted by the maximum for range.
pub fn softmax_weights(xs: &[f64], temperature: f64) -> Vec<f64> {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    xs.iter().map(|&x| ((x - top) / temperature).exp()).collect()
}

/// Draws an index with probability proportional to `weights`, optionally
/// excluding one index.
pub fn sample_weighted(weights: &[f64], exclude: Option<usize>, rng: &mut impl rand::Rng) -> usize {
    let total: f64 = weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .map(|(_, w)| w)
        .sum();
    let mut target = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        last = Some(i);
        if target < w {
            return i;
        }
        target -= w;
    }
    last.expect("sample_weighted needs at least one eligible index")
}

fn pick_member(cluster: &Cluster, t_prog: f64, exclude: Option<usize>, rng: &mut impl rand::Rng) -> usize {
    let lengths: Vec<usize> = cluster.members.iter().map(|m| m.length_chars).collect();
    sample_weighted(&length_weights(&lengths, t_prog), exclude, rng)
}
