//! Final run report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmStats {
    pub requests: u64,
    pub retries: u64,
    pub transport_failures: u64,
    pub extraction_failures: u64,
}

/// Deliberately free of timings so identical runs give identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub criterion: String,
    pub operator: String,
    pub seed: u64,
    pub t: u64,
    pub registrations: u64,
    pub evaluations: u64,
    pub dropped: u64,
    pub failures: BTreeMap<String, u64>,
    pub resets: u64,
    pub islands_reset: u64,
    pub best_id: u64,
    pub best_source: String,
    pub best_score: f64,
    /// Task figures for the best candidate (excess ratio, cap set size...).
    pub summary: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmStats>,
}

impl RunReport {
    pub fn build(engine: &Engine) -> Self {
        let cfg = engine.config();
        let db = engine.database();
        let c = engine.counters();
        let best = db.best_candidate().expect("database is seeded");
        let parts = engine.components();
        Self {
            task: cfg.task.name().to_string(),
            criterion: cfg.criterion.name().to_string(),
            operator: serde_json::to_value(cfg.operator).unwrap().as_str().unwrap().to_string(),
            seed: cfg.seed,
            t: db.t(),
            registrations: c.registrations,
            evaluations: c.evaluations,
            dropped: c.dropped,
            failures: c.failures.clone(),
            resets: c.resets,
            islands_reset: c.islands_reset,
            best_id: best.id,
            best_source: best.source.clone(),
            best_score: best.score,
            summary: parts.harness.summarize(&best.score_vector),
            llm: parts.llm.as_ref().map(|op| {
                let k = op.counters();
                LlmStats {
                    requests: k.requests(),
                    retries: k.retries(),
                    transport_failures: k.transport_failures(),
                    extraction_failures: k.extraction_failures(),
                }
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
