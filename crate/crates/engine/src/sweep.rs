//! Repeated runs over values of one config key.

use std::fmt::Write as _;

use crate::config::{set_param, RunConfig};
use crate::engine::Engine;
use crate::report::RunReport;
use crate::EngineError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub seed: u64,
    pub report: RunReport,
}

/// Runs `base` once per (value, seed) with `param` overridden; seeds are
/// `base.seed .. base.seed + runs`.
pub fn sweep(
    base: &toml::Table,
    param: &str,
    values: &[String],
    runs: u64,
    mut progress: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>, EngineError> {
    let first = RunConfig::from_table(base.clone())?;
    let mut rows = Vec::new();
    for value in values {
        for r in 0..runs {
            let mut table = base.clone();
            set_param(&mut table, param, value);
            let seed = first.seed + r;
            table.insert("seed".into(), toml::Value::Integer(seed as i64));
            let mut cfg = RunConfig::from_table(table)?;
            cfg.output_dir = None;
            let report = Engine::new(cfg)?.run()?;
            let row = SweepRow {
                value: value.clone(),
                seed,
                report,
            };
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{param},seed,best_score,registrations,resets\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.value, r.seed, r.report.best_score, r.report.registrations, r.report.resets
        );
    }
    out
}
