//! Euclidean TSP via guided local search with an evolved additive update to
//! the working distance matrix.
//!
//! Each GLS iteration runs 2-opt on the working matrix, keeps the best route
//! measured on the original matrix, then adds `update(working, best)` to the
//! working matrix.

use std::collections::BTreeMap;

use heurevo_core::expr::{Binding, CompiledExpr};
use heurevo_core::{CandidateKind, Deadline, EvalFailure, TaskHarness};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::TaskError;

/// Largest instance the exact dynamic program accepts.
pub const HELD_KARP_LIMIT: usize = 20;

pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &[f64]) {
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspInstance {
    pub cities: Vec<[f64; 2]>,
    #[serde(default)]
    pub optimum_length: Option<f64>,
}

impl TspInstance {
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        Self {
            cities: (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect(),
            optimum_length: None,
        }
    }

    pub fn distance_matrix(&self) -> Matrix {
        let n = self.cities.len();
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let d = euclidean(self.cities[i], self.cities[j]);
                m.set(i, j, d);
                m.set(j, i, d);
            }
        }
        m
    }
}

pub fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Closed-tour length, summed edge by edge in route order, closing edge last.
pub fn tour_length(route: &[usize], m: &Matrix) -> f64 {
    if route.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for w in route.windows(2) {
        s += m.get(w[0], w[1]);
    }
    s + m.get(route[route.len() - 1], route[0])
}

/// Best-improvement 2-opt: each pass scores every reversal of `route[i..j]`
/// (1 <= i, j - i >= 2, j <= n, so the closing edge is included) against the
/// best found so far in that pass, keeps the shortest, and repeats from it
/// until a pass finds no strict improvement. City `route[0]` stays first.
pub fn two_opt(route: &[usize], m: &Matrix) -> Vec<usize> {
    let n = route.len();
    let mut route = route.to_vec();
    let mut best = route.clone();
    let mut best_len = tour_length(&best, m);
    let mut cand = vec![0; n];
    loop {
        let mut improved = false;
        for i in 1..n.saturating_sub(1) {
            for j in i + 2..=n {
                cand[..i].copy_from_slice(&route[..i]);
                for (k, &c) in route[i..j].iter().rev().enumerate() {
                    cand[i + k] = c;
                }
                cand[j..].copy_from_slice(&route[j..]);
                let len = tour_length(&cand, m);
                if len < best_len {
                    best.copy_from_slice(&cand);
                    best_len = len;
                    improved = true;
                }
            }
        }
        route.copy_from_slice(&best);
        if !improved {
            return best;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlsResult {
    pub best_route: Vec<usize>,
    /// Under the original matrix.
    pub best_length: f64,
    /// Best length after each iteration.
    pub trace: Vec<f64>,
}

/// Guided local search from the identity route. `update(working, best)`
/// returns the n*n row-major increment for the working matrix.
pub fn guided_local_search<F>(base: &Matrix, max_iterations: usize, mut update: F) -> Result<GlsResult, EvalFailure>
where
    F: FnMut(&Matrix, &[usize]) -> Result<Vec<f64>, EvalFailure>,
{
    let n = base.len();
    let mut working = base.clone();
    let mut route: Vec<usize> = (0..n).collect();
    let mut best_route = route.clone();
    let mut best_length = tour_length(&best_route, base);
    let mut trace = Vec::with_capacity(max_iterations);
    for _ in 0..max_iterations {
        route = two_opt(&route, &working);
        let len = tour_length(&route, base);
        if len < best_length {
            best_route.clone_from(&route);
            best_length = len;
        }
        trace.push(best_length);
        let delta = update(&working, &best_route)?;
        if delta.len() != n * n {
            return Err(EvalFailure::invalid(format!(
                "update has {} entries, expected {}",
                delta.len(),
                n * n
            )));
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(EvalFailure::invalid("update is not finite"));
        }
        working.add_assign(&delta);
    }
    Ok(GlsResult {
        best_route,
        best_length,
        trace,
    })
}

/// Exact optimum by bitmask dynamic programming over subsets containing
/// city 0.
pub fn held_karp(m: &Matrix) -> Result<f64, TaskError> {
    let n = m.len();
    if n > HELD_KARP_LIMIT {
        return Err(TaskError::Invalid(format!(
            "exact solver supports at most {HELD_KARP_LIMIT} cities, got {n}"
        )));
    }
    match n {
        0 | 1 => return Ok(0.0),
        2 => return Ok(m.get(0, 1) + m.get(1, 0)),
        _ => {}
    }
    // dp[mask][j]: shortest path from 0 through the cities in `mask` (over
    // cities 1..n, bit k-1 = city k) ending at city j
    let k = n - 1;
    let full = 1usize << k;
    let mut dp = vec![f64::INFINITY; full * k];
    for j in 0..k {
        dp[(1 << j) * k + j] = m.get(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..k {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * k + j];
            if !cur.is_finite() {
                continue;
            }
            for nx in 0..k {
                if mask & (1 << nx) != 0 {
                    continue;
                }
                let next = mask | (1 << nx);
                let cand = cur + m.get(j + 1, nx + 1);
                if cand < dp[next * k + nx] {
                    dp[next * k + nx] = cand;
                }
            }
        }
    }
    Ok((0..k)
        .map(|j| dp[(full - 1) * k + j] + m.get(j + 1, 0))
        .fold(f64::INFINITY, f64::min))
}

/// Expression variables, evaluated per matrix entry: the working distance,
/// whether the entry is an edge of the best route (1 or 0), and the mean
/// working-matrix entry.
pub const VARIABLES: [&str; 3] = ["dist", "in_route", "mean_dist"];

/// 1.0 for entries on the closed tour `route` (both directions), else 0.0.
pub fn route_mask(route: &[usize], n: usize) -> Vec<f64> {
    let mut mask = vec![0.0; n * n];
    for (k, &a) in route.iter().enumerate() {
        let b = route[(k + 1) % route.len()];
        mask[a * n + b] = 1.0;
        mask[b * n + a] = 1.0;
    }
    mask
}

pub fn expression_update(f: &CompiledExpr) -> impl FnMut(&Matrix, &[usize]) -> Result<Vec<f64>, EvalFailure> + '_ {
    let mut stack = Vec::new();
    move |working, best| {
        let n = working.len();
        let mask = route_mask(best, n);
        let mean = working.as_slice().iter().sum::<f64>() / (n * n) as f64;
        let mut out = Vec::with_capacity(n * n);
        f.eval_into(
            &[Binding::Vector(working.as_slice()), Binding::Vector(&mask), Binding::Scalar(mean)],
            &mut stack,
            &mut out,
        )
        .map_err(|e| EvalFailure::invalid(e.to_string()))?;
        Ok(out)
    }
}

pub fn instance_score(best_length: f64, optimum: f64) -> f64 {
    -(best_length - optimum) / optimum
}

struct Prepared {
    base: Matrix,
    optimum: f64,
}

pub struct TspHarness {
    instances: Vec<TspInstance>,
    prepared: Vec<Prepared>,
    max_iterations: usize,
}

impl TspHarness {
    /// Instances lacking an optimum get one from [`held_karp`].
    pub fn new(mut instances: Vec<TspInstance>, max_iterations: usize) -> Result<Self, TaskError> {
        if instances.is_empty() {
            return Err(TaskError::Invalid("no TSP instances".into()));
        }
        if max_iterations == 0 {
            return Err(TaskError::Invalid("max_iterations must be at least 1".into()));
        }
        let mut prepared = Vec::with_capacity(instances.len());
        for (i, inst) in instances.iter_mut().enumerate() {
            if inst.cities.len() < 3 {
                return Err(TaskError::Invalid(format!("instance {i} has fewer than 3 cities")));
            }
            let base = inst.distance_matrix();
            let optimum = match inst.optimum_length {
                Some(o) => o,
                None => held_karp(&base)?,
            };
            if !(optimum > 0.0) {
                return Err(TaskError::Invalid(format!("instance {i} has non-positive optimum")));
            }
            inst.optimum_length = Some(optimum);
            prepared.push(Prepared { base, optimum });
        }
        Ok(Self {
            instances,
            prepared,
            max_iterations,
        })
    }

    pub fn instances(&self) -> &[TspInstance] {
        &self.instances
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }
}

impl TaskHarness for TspHarness {
    fn task_name(&self) -> &str {
        "tsp"
    }

    fn instance_count(&self) -> usize {
        self.instances.len()
    }

    fn variables(&self) -> &[&'static str] {
        &VARIABLES
    }

    fn score_expression(&self, f: &CompiledExpr, deadline: &Deadline) -> Result<Vec<f64>, EvalFailure> {
        self.prepared
            .iter()
            .map(|p| {
                deadline.check()?;
                let mut update = expression_update(f);
                let r = guided_local_search(&p.base, self.max_iterations, |w, b| {
                    deadline.check()?;
                    update(w, b)
                })?;
                Ok(instance_score(r.best_length, p.optimum))
            })
            .collect()
    }

    fn payload(&self) -> serde_json::Value {
        json!({ "instances": self.instances, "max_iterations": self.max_iterations })
    }

    fn seed_source(&self, kind: CandidateKind) -> String {
        match kind {
            CandidateKind::Expression => "0.0".into(),
            CandidateKind::External => "return np.zeros_like(distance_matrix)".into(),
        }
    }

    fn summarize(&self, scores: &[f64]) -> BTreeMap<String, f64> {
        let mean = scores.iter().map(|s| -s).sum::<f64>() / scores.len().max(1) as f64;
        BTreeMap::from([("excess_ratio".to_string(), mean)])
    }
}
