//! Cap sets in Z3^n built greedily from a priority over all 3^n vectors.
//!
//! Vector `i` carries the base-3 digits of `i`, most significant first.
//! Adding `v` blocks `v` itself and, for each member `c`, the point
//! `(-c - v) mod 3` that would complete the line through `c` and `v`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use heurevo_core::expr::{Binding, CompiledExpr};
use heurevo_core::{CandidateKind, Deadline, EvalFailure, TaskHarness};
use serde_json::json;

use crate::TaskError;

pub const MAX_DIM: usize = 8;

/// All vectors of Z3^n in index order.
pub fn enumerate(n: usize) -> Vec<Vec<u8>> {
    let total = 3usize.pow(n as u32);
    (0..total)
        .map(|mut i| {
            let mut digits = vec![0u8; n];
            for d in digits.iter_mut().rev() {
                *d = (i % 3) as u8;
                i /= 3;
            }
            digits
        })
        .collect()
}

pub fn index_of(v: &[u8]) -> usize {
    v.iter().fold(0, |acc, &d| acc * 3 + d as usize)
}

fn third_point(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(&x, &y)| (6 - x - y) % 3).collect()
}

/// Greedy construction; returns member indices in insertion order.
/// Priorities must be finite.
pub fn greedy_capset(n: usize, priorities: &[f64]) -> Vec<usize> {
    let vectors = enumerate(n);
    assert_eq!(priorities.len(), vectors.len(), "one priority per vector");
    let mut prio = priorities.to_vec();
    let mut members: Vec<usize> = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for (i, &p) in prio.iter().enumerate() {
            if p != f64::NEG_INFINITY && best.is_none_or(|b| p > prio[b]) {
                best = Some(i);
            }
        }
        let Some(v) = best else { break };
        for &c in &members {
            prio[index_of(&third_point(&vectors[c], &vectors[v]))] = f64::NEG_INFINITY;
        }
        prio[v] = f64::NEG_INFINITY;
        members.push(v);
    }
    members
}

/// True iff the vectors are distinct and no three distinct members sum to
/// zero mod 3.
pub fn verify_capset(vectors: &[Vec<u8>]) -> bool {
    let set: HashSet<&[u8]> = vectors.iter().map(Vec::as_slice).collect();
    if set.len() != vectors.len() {
        return false;
    }
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            let c = third_point(a, b);
            if c != *a && c != *b && set.contains(c.as_slice()) {
                return false;
            }
        }
    }
    true
}

/// One vector per line, digits separated by spaces.
pub fn export_text(vectors: &[Vec<u8>]) -> String {
    let mut out = String::new();
    for v in vectors {
        let line: Vec<String> = v.iter().map(u8::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

const NAMES: [&str; 5 + MAX_DIM] = [
    "n", "sum", "zeros", "ones", "twos", "x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7",
];

pub struct CapsetHarness {
    n: usize,
    vectors: Vec<Vec<u8>>,
    /// Feature columns in `NAMES` order, one entry per vector.
    columns: Vec<Vec<f64>>,
}

impl CapsetHarness {
    pub fn new(n: usize) -> Result<Self, TaskError> {
        if n == 0 || n > MAX_DIM {
            return Err(TaskError::Invalid(format!("cap set dimension must be in 1..={MAX_DIM}, got {n}")));
        }
        let vectors = enumerate(n);
        let count = |v: &[u8], d: u8| v.iter().filter(|&&x| x == d).count() as f64;
        let mut columns = vec![
            vec![n as f64; vectors.len()],
            vectors.iter().map(|v| v.iter().map(|&d| d as f64).sum()).collect(),
            vectors.iter().map(|v| count(v, 0)).collect(),
            vectors.iter().map(|v| count(v, 1)).collect(),
            vectors.iter().map(|v| count(v, 2)).collect(),
        ];
        for k in 0..n {
            columns.push(vectors.iter().map(|v| v[k] as f64).collect());
        }
        Ok(Self { n, vectors, columns })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn vectors(&self) -> &[Vec<u8>] {
        &self.vectors
    }

    pub fn priorities(&self, f: &CompiledExpr) -> Result<Vec<f64>, EvalFailure> {
        let bindings: Vec<Binding<'_>> = self.columns.iter().map(|c| Binding::Vector(c)).collect();
        let prio = f.eval(&bindings).map_err(|e| EvalFailure::invalid(e.to_string()))?;
        if prio.iter().any(|p| !p.is_finite()) {
            return Err(EvalFailure::invalid("priority is not finite"));
        }
        Ok(prio)
    }

    /// The cap set an expression priority builds.
    pub fn construct(&self, f: &CompiledExpr) -> Result<Vec<Vec<u8>>, EvalFailure> {
        let prio = self.priorities(f)?;
        Ok(greedy_capset(self.n, &prio)
            .into_iter()
            .map(|i| self.vectors[i].clone())
            .collect())
    }
}

impl TaskHarness for CapsetHarness {
    fn task_name(&self) -> &str {
        "capset"
    }

    fn instance_count(&self) -> usize {
        1
    }

    fn variables(&self) -> &[&'static str] {
        &NAMES[..5 + self.n]
    }

    fn score_expression(&self, f: &CompiledExpr, deadline: &Deadline) -> Result<Vec<f64>, EvalFailure> {
        let prio = self.priorities(f)?;
        deadline.check()?;
        Ok(vec![greedy_capset(self.n, &prio).len() as f64])
    }

    fn payload(&self) -> serde_json::Value {
        json!({ "instances": [{ "n": self.n }] })
    }

    fn seed_source(&self, kind: CandidateKind) -> String {
        match kind {
            CandidateKind::Expression => "0.0".into(),
            CandidateKind::External => "return 0.0".into(),
        }
    }

    fn summarize(&self, scores: &[f64]) -> BTreeMap<String, f64> {
        BTreeMap::from([("capset_size".to_string(), scores.first().copied().unwrap_or(0.0))])
    }
}
