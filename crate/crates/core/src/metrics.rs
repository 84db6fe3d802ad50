//! Windowed exploitation/exploration diagnostics over generated samples.
//!
//! *Recent best score* is the highest score among the last `K` successful
//! samples. *Recent proportion of change* averages, over the same window, the
//! token edit distance between a sample and its nearest parent divided by the
//! sample's own token count. Failed samples occupy window slots but never
//! contribute a value.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::CandidateId;

/// Default window length for both diagnostics.
pub const DEFAULT_WINDOW: usize = 500;

/// Splits source into maximal identifier/number runs and single punctuation
/// characters, discarding whitespace.
pub fn tokenize(source: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in source.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Levenshtein distance between two sequences (unit insert/delete/substitute).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// One generated sample together with the token streams needed to measure
/// how far it moved from its parents.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEvent {
    pub candidate_id: Option<CandidateId>,
    pub score: f64,
    pub success: bool,
    pub tokens: Vec<String>,
    pub parent_tokens: Vec<Vec<String>>,
}

impl SampleEvent {
    pub fn success(id: CandidateId, score: f64, source: &str, parents: &[&str]) -> Self {
        Self {
            candidate_id: Some(id),
            score,
            success: true,
            tokens: tokenize(source),
            parent_tokens: parents.iter().map(|p| tokenize(p)).collect(),
        }
    }

    pub fn failure() -> Self {
        Self {
            candidate_id: None,
            score: 0.0,
            success: false,
            tokens: Vec::new(),
            parent_tokens: Vec::new(),
        }
    }
}

/// Edit distance to the nearest parent over the sample's token count;
/// zero for an empty sample or a parentless one.
pub fn proportion_of_change(sample: &SampleEvent) -> f64 {
    if sample.tokens.is_empty() {
        return 0.0;
    }
    let nearest = sample
        .parent_tokens
        .iter()
        .map(|p| levenshtein(&sample.tokens, p))
        .min();
    match nearest {
        Some(d) => d as f64 / sample.tokens.len() as f64,
        None => 0.0,
    }
}

/// Compact log entry: what the windowed metrics need from a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub candidate_id: Option<CandidateId>,
    pub success: bool,
    pub score: f64,
    pub change: f64,
}

impl From<&SampleEvent> for EventRecord {
    fn from(e: &SampleEvent) -> Self {
        let change = if e.success { proportion_of_change(e) } else { 0.0 };
        Self {
            candidate_id: e.candidate_id,
            success: e.success,
            score: if e.success { e.score } else { 0.0 },
            change,
        }
    }
}

fn window(events: &[EventRecord], k: usize) -> &[EventRecord] {
    &events[events.len().saturating_sub(k)..]
}

/// Highest successful score among the last `k` events, or `-inf`.
pub fn recent_best_score(events: &[EventRecord], k: usize) -> f64 {
    window(events, k)
        .iter()
        .filter(|e| e.success)
        .map(|e| e.score)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Mean proportion of change over successful events among the last `k`, or 0.
pub fn recent_proportion_of_change(events: &[EventRecord], k: usize) -> f64 {
    let (sum, n) = window(events, k)
        .iter()
        .filter(|e| e.success)
        .fold((0.0, 0usize), |(s, n), e| (s + e.change, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// One reporting tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub t: u64,
    #[serde(with = "crate::serde_float")]
    pub global_best: f64,
    #[serde(with = "crate::serde_float")]
    pub recent_best_score: f64,
    pub recent_proportion_of_change: f64,
    pub islands_reset_cumulative: u64,
}

pub const CSV_HEADER: &str = "t,global_best,recent_best_score,recent_proportion_of_change,islands_reset_cumulative";

pub fn write_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.global_best, r.recent_best_score, r.recent_proportion_of_change, r.islands_reset_cumulative
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err("missing or unexpected CSV header".into()),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("line {}: expected 5 fields", i + 2));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
            let int = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("line {}: {e}", i + 2));
            Ok(MetricRow {
                t: int(f[0])?,
                global_best: num(f[1])?,
                recent_best_score: num(f[2])?,
                recent_proportion_of_change: num(f[3])?,
                islands_reset_cumulative: int(f[4])?,
            })
        })
        .collect()
}
