//! Online bin packing.
//!
//! Every instance gets one bin per item, all starting empty. Items arrive in
//! order; each goes to the valid bin (residual >= item) with the highest
//! priority, lowest index on ties.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use heurevo_core::expr::{Binding, CompiledExpr};
use heurevo_core::{CandidateKind, Deadline, EvalFailure, TaskHarness};
use rand::Rng;
use rand_distr::{Distribution, Weibull};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::TaskError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinPackInstance {
    pub id: String,
    pub capacity: u32,
    pub items: Vec<u32>,
    /// Best known bin count (OR-Library) or the L2 bound (generated sets).
    pub lower_bound: u32,
}

impl BinPackInstance {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.capacity == 0 {
            return Err(TaskError::Invalid(format!("{}: zero capacity", self.id)));
        }
        if let Some(bad) = self.items.iter().find(|&&x| x == 0 || x > self.capacity) {
            return Err(TaskError::Invalid(format!("{}: item {bad} outside 1..={}", self.id, self.capacity)));
        }
        if self.lower_bound == 0 && !self.items.is_empty() {
            return Err(TaskError::Invalid(format!("{}: zero lower bound", self.id)));
        }
        Ok(())
    }
}

/// Parses OR-Library `binpack*.txt` text: a problem count, then per problem
/// an id line, a `capacity n_items best_known` line and one item per line.
pub fn parse_or_library(text: &str) -> Result<Vec<BinPackInstance>, TaskError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| -> Result<(usize, &str), TaskError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| TaskError::parse(text.lines().count() + 1, format!("unexpected end of file, expected {what}")))
    };
    fn num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T, TaskError> {
        field
            .parse()
            .map_err(|_| TaskError::parse(line, format!("{what} `{field}` is not a non-negative integer")))
    }

    let (line, count) = next("problem count")?;
    let count: usize = num(line, count, "problem count")?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (_, id) = next("problem identifier")?;
        let (line, header) = next("`capacity n_items best_known` line")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(TaskError::parse(line, format!("expected 3 fields, found {}", fields.len())));
        }
        let capacity: u32 = num(line, fields[0], "capacity")?;
        let n_items: usize = num(line, fields[1], "item count")?;
        let best: u32 = num(line, fields[2], "best known")?;
        if capacity == 0 {
            return Err(TaskError::parse(line, "capacity must be positive"));
        }
        let mut items = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            let (line, item) = next("item size")?;
            let item: u32 = num(line, item, "item")?;
            if item == 0 || item > capacity {
                return Err(TaskError::parse(line, format!("item {item} outside 1..={capacity}")));
            }
            items.push(item);
        }
        out.push(BinPackInstance {
            id: id.to_string(),
            capacity,
            items,
            lower_bound: best,
        });
    }
    if let Ok((line, _)) = next("") {
        return Err(TaskError::parse(line, format!("trailing content after {count} problems")));
    }
    Ok(out)
}

/// Canonical OR-Library text: header lines carry one leading space, item
/// lines none.
pub fn serialize_or_library(instances: &[BinPackInstance]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, " {}", instances.len());
    for inst in instances {
        let _ = writeln!(out, " {}", inst.id);
        let _ = writeln!(out, " {} {} {}", inst.capacity, inst.items.len(), inst.lower_bound);
        for item in &inst.items {
            let _ = writeln!(out, "{item}");
        }
    }
    out
}

/// Martello-Toth L2 lower bound on the optimal bin count.
pub fn l2_lower_bound(capacity: u32, items: &[u32]) -> u32 {
    let c = capacity as u64;
    let mut best = 0u64;
    for alpha in 0..=c / 2 {
        let (mut n1, mut n2, mut sum2, mut sum3) = (0u64, 0u64, 0u64, 0u64);
        for &x in items {
            let x = x as u64;
            if x > c - alpha {
                n1 += 1;
            } else if 2 * x > c {
                n2 += 1;
                sum2 += x;
            } else if x >= alpha {
                sum3 += x;
            }
        }
        let free = n2 * c - sum2;
        let extra = if sum3 > free { (sum3 - free).div_ceil(c) } else { 0 };
        best = best.max(n1 + n2 + extra);
    }
    best as u32
}

/// Raw draws are Weibull(scale 45, shape 3); items are those draws clipped
/// to [0, 100] and rounded into 1..=100. Capacity is 100.
pub fn weibull_item(rng: &mut impl Rng) -> u32 {
    let w: f64 = weibull().sample(rng);
    w.clamp(0.0, 100.0).round().clamp(1.0, 100.0) as u32
}

pub fn weibull() -> Weibull<f64> {
    Weibull::new(45.0, 3.0).expect("valid Weibull parameters")
}

pub fn generate_weibull(count: usize, n_items: usize, rng: &mut impl Rng) -> Vec<BinPackInstance> {
    (0..count)
        .map(|i| {
            let items: Vec<u32> = (0..n_items).map(|_| weibull_item(rng)).collect();
            BinPackInstance {
                id: format!("weibull_{n_items}_{i:02}"),
                capacity: 100,
                lower_bound: l2_lower_bound(100, &items),
                items,
            }
        })
        .collect()
}

/// Packs `inst` online. `priority(item, valid_residuals, out)` must write one
/// value per valid bin; the first maximum wins. Returns the number of bins
/// that received at least one item.
pub fn run_online_packing<F>(inst: &BinPackInstance, mut priority: F) -> Result<usize, EvalFailure>
where
    F: FnMut(f64, &[f64], &mut Vec<f64>) -> Result<(), EvalFailure>,
{
    let cap = inst.capacity as f64;
    let mut bins = vec![cap; inst.items.len()];
    let mut valid_idx = Vec::new();
    let mut valid = Vec::new();
    let mut prios = Vec::new();
    for &item in &inst.items {
        let item = item as f64;
        valid_idx.clear();
        valid.clear();
        for (i, &r) in bins.iter().enumerate() {
            if r - item >= 0.0 {
                valid_idx.push(i);
                valid.push(r);
            }
        }
        priority(item, &valid, &mut prios)?;
        let k = first_argmax(&prios, valid.len())?;
        bins[valid_idx[k]] -= item;
    }
    Ok(bins.iter().filter(|&&b| b != cap).count())
}

fn first_argmax(prios: &[f64], expected: usize) -> Result<usize, EvalFailure> {
    if prios.len() != expected {
        return Err(EvalFailure::invalid(format!(
            "priority returned {} values for {expected} bins",
            prios.len()
        )));
    }
    let mut best = 0;
    for (i, &p) in prios.iter().enumerate() {
        if !p.is_finite() {
            return Err(EvalFailure::invalid("priority is not finite"));
        }
        if p > prios[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Same result as [`run_online_packing`] for priorities computed bin by bin
/// from (item, residual) alone: untouched bins all share one residual, and
/// since bins open in index order they form a suffix, so one of them stands
/// in for all.
fn pack_elementwise(
    inst: &BinPackInstance,
    f: &CompiledExpr,
    stack: &mut Vec<f64>,
) -> Result<usize, EvalFailure> {
    let cap = inst.capacity as f64;
    let n = inst.items.len();
    let mut open: Vec<f64> = Vec::with_capacity(n);
    let mut valid_idx = Vec::with_capacity(n);
    for &item in &inst.items {
        let item = item as f64;
        let mut best: Option<(usize, f64)> = None;
        valid_idx.clear();
        for (i, &r) in open.iter().enumerate() {
            if r - item >= 0.0 {
                valid_idx.push(i);
            }
        }
        let slots = valid_idx.len() + usize::from(open.len() < n);
        for s in 0..slots {
            let (bin, r) = match valid_idx.get(s) {
                Some(&i) => (i, open[i]),
                None => (open.len(), cap),
            };
            let p = f.eval_with(|v| if v == 0 { item } else { r }, stack);
            if !p.is_finite() {
                return Err(EvalFailure::invalid("priority is not finite"));
            }
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((bin, p));
            }
        }
        let (bin, _) = best.expect("an empty bin always remains");
        if bin == open.len() {
            open.push(cap);
        }
        open[bin] -= item;
    }
    Ok(open.len())
}

/// Per-instance score `(lower_bound - bins_used) / lower_bound`.
pub fn instance_score(lower_bound: u32, bins_used: usize) -> f64 {
    (lower_bound as f64 - bins_used as f64) / lower_bound as f64
}

/// `(sum used - sum bound) / sum bound` over a dataset.
pub fn excess_ratio(lower_bounds: &[u32], bins_used: &[usize]) -> f64 {
    let lb: f64 = lower_bounds.iter().map(|&x| x as f64).sum();
    let used: f64 = bins_used.iter().map(|&x| x as f64).sum();
    (used - lb) / lb
}

pub struct ObpHarness {
    instances: Vec<BinPackInstance>,
}

impl ObpHarness {
    pub fn new(instances: Vec<BinPackInstance>) -> Result<Self, TaskError> {
        if instances.is_empty() {
            return Err(TaskError::Invalid("no bin packing instances".into()));
        }
        for inst in &instances {
            inst.validate()?;
        }
        Ok(Self { instances })
    }

    pub fn instances(&self) -> &[BinPackInstance] {
        &self.instances
    }

    /// Bins used per instance by an expression priority over `item, bins`.
    pub fn bins_used(&self, f: &CompiledExpr, deadline: &Deadline) -> Result<Vec<usize>, EvalFailure> {
        let mut stack = Vec::with_capacity(32);
        self.instances
            .iter()
            .map(|inst| {
                deadline.check()?;
                pack_elementwise(inst, f, &mut stack)
            })
            .collect()
    }
}

/// Expression variables: the incoming item and a bin's residual capacity.
pub const VARIABLES: [&str; 2] = ["item", "bins"];

impl TaskHarness for ObpHarness {
    fn task_name(&self) -> &str {
        "obp"
    }

    fn instance_count(&self) -> usize {
        self.instances.len()
    }

    fn variables(&self) -> &[&'static str] {
        &VARIABLES
    }

    fn score_expression(&self, f: &CompiledExpr, deadline: &Deadline) -> Result<Vec<f64>, EvalFailure> {
        let used = self.bins_used(f, deadline)?;
        Ok(self
            .instances
            .iter()
            .zip(used)
            .map(|(inst, u)| instance_score(inst.lower_bound, u))
            .collect())
    }

    fn payload(&self) -> serde_json::Value {
        json!({ "instances": self.instances })
    }

    fn seed_source(&self, kind: CandidateKind) -> String {
        match kind {
            CandidateKind::Expression => "0.0".into(),
            CandidateKind::External => "return 0.0".into(),
        }
    }

    fn summarize(&self, scores: &[f64]) -> BTreeMap<String, f64> {
        let lbs: Vec<u32> = self.instances.iter().map(|i| i.lower_bound).collect();
        let used: Vec<usize> = lbs
            .iter()
            .zip(scores)
            .map(|(&lb, &s)| (lb as f64 * (1.0 - s)).round() as usize)
            .collect();
        BTreeMap::from([
            ("excess_ratio".to_string(), excess_ratio(&lbs, &used)),
            ("bins_used".to_string(), used.iter().sum::<usize>() as f64),
            ("lower_bound".to_string(), lbs.iter().map(|&x| x as f64).sum()),
        ])
    }
}

/// Evaluates an expression priority the plain way: over every valid bin.
pub fn expression_priority(
    f: &CompiledExpr,
) -> impl FnMut(f64, &[f64], &mut Vec<f64>) -> Result<(), EvalFailure> + '_ {
    let mut stack = Vec::new();
    move |item, bins, out| {
        f.eval_into(&[Binding::Scalar(item), Binding::Vector(bins)], &mut stack, out)
            .map_err(|e| EvalFailure::invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(capacity: u32, items: &[u32]) -> BinPackInstance {
        BinPackInstance {
            id: "t".into(),
            capacity,
            items: items.to_vec(),
            lower_bound: l2_lower_bound(capacity, items),
        }
    }

    fn best_fit(item: f64, bins: &[f64], out: &mut Vec<f64>) -> Result<(), EvalFailure> {
        out.clear();
        out.extend(bins.iter().map(|b| -(b - item)));
        Ok(())
    }

    #[test]
    fn best_fit_hand_trace() {
        assert_eq!(run_online_packing(&inst(10, &[5, 5, 5]), best_fit), Ok(2));
    }

    #[test]
    fn full_items_force_one_bin_each() {
        let zero = |_: f64, b: &[f64], out: &mut Vec<f64>| {
            out.clear();
            out.resize(b.len(), 0.0);
            Ok(())
        };
        assert_eq!(run_online_packing(&inst(100, &[100, 100, 100]), zero), Ok(3));
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_lower_bound(100, &[100, 100, 100]), 3);
        assert_eq!(l2_lower_bound(100, &[60, 50, 40, 30]), 2);
        assert_eq!(l2_lower_bound(10, &[6, 6, 6]), 3);
        assert_eq!(l2_lower_bound(10, &[]), 0);
    }

    #[test]
    fn scores_and_excess() {
        assert_eq!(instance_score(2, 3), -0.5);
        assert_eq!(instance_score(2, 2), 0.0);
        assert_eq!(excess_ratio(&[2, 2], &[3, 2]), 0.25);
    }

    #[test]
    fn parse_synthetic_file() {
        let text = " 1\n u3_00\n 100 3 2\n50\n50\n50\n";
        let got = parse_or_library(text).unwrap();
        assert_eq!(got, vec![BinPackInstance {
            id: "u3_00".into(),
            capacity: 100,
            items: vec![50, 50, 50],
            lower_bound: 2
        }]);
        assert_eq!(serialize_or_library(&got), text);
    }

    #[test]
    fn parse_errors_name_lines() {
        let missing = parse_or_library(" 2\n a\n 10 1 1\n5\n").unwrap_err();
        assert!(matches!(missing, TaskError::Parse { .. }), "{missing}");
        let big = parse_or_library(" 1\n a\n 10 2 1\n5\n11\n").unwrap_err();
        assert_eq!(big, TaskError::parse(5, "item 11 outside 1..=10"));
        let nan = parse_or_library(" 1\n a\n 10 x 1\n").unwrap_err();
        assert!(matches!(nan, TaskError::Parse { line: 3, .. }));
        assert!(parse_or_library(" 1\n a\n 10 1 1\n5\n6\n").is_err());
    }
}
