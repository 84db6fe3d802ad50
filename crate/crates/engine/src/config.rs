//! Run configuration. A TOML file only needs to name the task; everything
//! else falls back to the per-task defaults below.

use std::path::PathBuf;
use std::str::FromStr;

use heurevo_core::{Criterion, PriorityConfig, ResetRule};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ObpOr,
    ObpWeibull,
    Capset,
    Tsp,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ObpOr => "obp_or",
            TaskKind::ObpWeibull => "obp_weibull",
            TaskKind::Capset => "capset",
            TaskKind::Tsp => "tsp",
        }
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "obp_or" => Ok(TaskKind::ObpOr),
            "obp_weibull" => Ok(TaskKind::ObpWeibull),
            "capset" => Ok(TaskKind::Capset),
            "tsp" => Ok(TaskKind::Tsp),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Stub,
    Llm,
}

impl FromStr for OperatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub" => Ok(OperatorKind::Stub),
            "llm" => Ok(OperatorKind::Llm),
            other => Err(format!("unknown operator `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObpOrSection {
    /// OR-Library file; required for `obp_or`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeibullSection {
    pub count: usize,
    pub n_items: usize,
    /// Seeds instance generation independently of the run seed.
    pub dataset_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsetSection {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TspSection {
    /// JSON list of instances; random instances are generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub count: usize,
    pub cities: usize,
    pub dataset_seed: u64,
    pub max_iterations: usize,
    /// Accepted for parity with the reference search signature; unused.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub request_timeout_s: f64,
    pub max_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerSection {
    /// Command line launching one worker process.
    pub command: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub seed: u64,
    pub operator: OperatorKind,
    pub islands: usize,
    pub criterion: Criterion,
    pub k: f64,
    pub t_prog: f64,
    /// Overrides the reset rule implied by the criterion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset: Option<ResetRule>,
    pub samplers: usize,
    pub evaluators: usize,
    pub n_samples: usize,
    pub total_samples: u64,
    pub timeout_s: f64,
    /// Registrations between resets; `"none"` disables resets.
    #[serde(serialize_with = "ser_interval", deserialize_with = "de_interval")]
    pub t_reset: Option<u64>,
    pub report_every: u64,
    /// 0 disables periodic snapshots.
    pub snapshot_every: u64,
    pub top_p: f64,
    pub temperature: f64,
    pub max_depth: usize,
    /// Give up after this many evaluations without reaching the budget.
    pub max_evaluations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub obp_or: ObpOrSection,
    pub obp_weibull: WeibullSection,
    pub capset: CapsetSection,
    pub tsp: TspSection,
    pub endpoint: EndpointSection,
    pub worker: WorkerSection,
}

fn ser_interval<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(n) => s.serialize_u64(*n),
        None => s.serialize_str("none"),
    }
}

fn de_interval<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Every(u64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Every(n) => Ok(Some(n)),
        Repr::Text(t) if t == "none" => Ok(None),
        Repr::Text(t) => Err(serde::de::Error::custom(format!("t_reset must be an integer or \"none\", got `{t}`"))),
    }
}

impl RunConfig {
    /// Defaults for `task` at full scale.
    pub fn for_task(task: TaskKind) -> Self {
        let (islands, n_samples, total, timeout, k, t_reset) = match task {
            TaskKind::ObpOr => (10, 4, 80_000, 30.0, 0.0008, Some(32_768)),
            TaskKind::ObpWeibull => (10, 4, 80_000, 60.0, 0.0001, Some(32_768)),
            TaskKind::Capset => (10, 4, 2_000_000, 90.0, 32.0, Some(262_144)),
            TaskKind::Tsp => (1, 1, 2_000, 90.0, 1e-5, None),
        };
        Self {
            task,
            seed: 0,
            operator: OperatorKind::Stub,
            islands,
            criterion: Criterion::Qutc,
            k,
            t_prog: 1.0,
            reset: None,
            samplers: 16,
            evaluators: 50,
            n_samples,
            total_samples: total,
            timeout_s: timeout,
            t_reset,
            report_every: 500,
            snapshot_every: 0,
            top_p: 0.95,
            temperature: 1.0,
            max_depth: heurevo_core::expr::DEFAULT_MAX_DEPTH,
            max_evaluations: 0,
            output_dir: None,
            obp_or: ObpOrSection { path: None },
            obp_weibull: WeibullSection {
                count: 5,
                n_items: 1000,
                dataset_seed: 0,
            },
            capset: CapsetSection { n: 8 },
            tsp: TspSection {
                path: None,
                count: 50,
                cities: 10,
                dataset_seed: 0,
                max_iterations: heurevo_tasks::tsp::DEFAULT_MAX_ITERATIONS,
                alpha: 0.1,
            },
            endpoint: EndpointSection {
                url: "http://127.0.0.1:8000/v1/chat/completions".into(),
                model: "default".into(),
                token_env: "HEUREVO_API_TOKEN".into(),
                request_timeout_s: 120.0,
                max_retries: 4,
                transcripts: None,
            },
            worker: WorkerSection { command: Vec::new() },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Overlays `table` onto the defaults of the task it names.
    pub fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let task: TaskKind = table
            .get("task")
            .and_then(|v| v.as_str())
            .ok_or_else(|| ConfigError::Invalid("`task` is required".into()))?
            .parse()
            .map_err(ConfigError::Invalid)?;
        let mut merged = toml::Table::try_from(Self::for_task(task)).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        if table.get("islands").and_then(|v| v.as_integer()) == Some(1) && !table.contains_key("t_reset") {
            merged.insert("t_reset".into(), toml::Value::String("none".into()));
        }
        merge(&mut merged, table);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn priority(&self) -> PriorityConfig {
        PriorityConfig {
            criterion: self.criterion,
            k: self.k,
            t_prog: self.t_prog,
            reset: self.reset,
        }
    }

    pub fn sampling(&self) -> heurevo_core::variation::Sampling {
        heurevo_core::variation::Sampling {
            n_samples: self.n_samples,
            top_p: self.top_p,
            temperature: self.temperature,
        }
    }

    /// Evaluation cap actually applied (`max_evaluations`, or 20x the budget
    /// plus slack when unset).
    pub fn evaluation_cap(&self) -> u64 {
        if self.max_evaluations > 0 {
            self.max_evaluations
        } else {
            self.total_samples.saturating_mul(20).saturating_add(1000)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.islands == 0 {
            return bad("islands must be at least 1".into());
        }
        match (self.islands, self.t_reset) {
            (1, Some(_)) => return bad("t_reset must be \"none\" when islands = 1".into()),
            (n, None) if n > 1 => return bad("t_reset is required when islands > 1".into()),
            (_, Some(0)) => return bad("t_reset must be positive".into()),
            _ => {}
        }
        self.priority().validate().map_err(ConfigError::Invalid)?;
        self.sampling().validate().map_err(ConfigError::Invalid)?;
        if self.samplers == 0 || self.evaluators == 0 {
            return bad("samplers and evaluators must be at least 1".into());
        }
        if self.total_samples == 0 {
            return bad("total_samples must be at least 1".into());
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return bad(format!("timeout_s must be positive, got {}", self.timeout_s));
        }
        if self.report_every == 0 {
            return bad("report_every must be at least 1".into());
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        match self.task {
            TaskKind::ObpOr if self.obp_or.path.is_none() => return bad("[obp_or] path is required".into()),
            TaskKind::ObpWeibull if self.obp_weibull.count == 0 || self.obp_weibull.n_items == 0 => {
                return bad("[obp_weibull] count and n_items must be positive".into())
            }
            TaskKind::Capset if !(1..=heurevo_tasks::capset::MAX_DIM).contains(&self.capset.n) => {
                return bad(format!("[capset] n must be in 1..={}", heurevo_tasks::capset::MAX_DIM))
            }
            TaskKind::Tsp if self.tsp.path.is_none() && (self.tsp.count == 0 || self.tsp.cities < 3) => {
                return bad("[tsp] needs count >= 1 and cities >= 3".into())
            }
            _ => {}
        }
        if self.operator == OperatorKind::Llm && self.worker.command.is_empty() {
            return bad("operator = \"llm\" needs [worker] command to execute candidates".into());
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets one top-level key of a config table from its textual value.
pub fn set_param(table: &mut toml::Table, key: &str, value: &str) {
    let v = if let Ok(i) = value.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = value.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = value.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(value.to_string())
    };
    table.insert(key.to_string(), v);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_task_defaults() {
        let c = RunConfig::from_toml_str("task = \"capset\"").unwrap();
        assert_eq!(c.k, 32.0);
        assert_eq!(c.t_reset, Some(262_144));
        assert_eq!(c.total_samples, 2_000_000);
        assert_eq!(c.timeout_s, 90.0);
        let t = RunConfig::from_toml_str("task = \"tsp\"").unwrap();
        assert_eq!((t.islands, t.n_samples, t.t_reset), (1, 1, None));
    }

    #[test]
    fn sections_merge_field_by_field() {
        let c = RunConfig::from_toml_str("task = \"obp_weibull\"\nk = 1\n[obp_weibull]\nn_items = 30\n").unwrap();
        assert_eq!(c.k, 1.0);
        assert_eq!(c.obp_weibull.n_items, 30);
        assert_eq!(c.obp_weibull.count, 5);
    }

    #[test]
    fn reset_interval_rules() {
        assert!(RunConfig::from_toml_str("task = \"tsp\"\nt_reset = 10").is_err());
        assert!(RunConfig::from_toml_str("task = \"capset\"\nt_reset = \"none\"").is_err());
        let one = RunConfig::from_toml_str("task = \"capset\"\nislands = 1").unwrap();
        assert_eq!(one.t_reset, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("task = \"tsp\"\nbogus = 1").is_err());
        assert!(RunConfig::from_toml_str("task = \"nope\"").is_err());
        assert!(RunConfig::from_toml_str("islands = 2").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::for_task(TaskKind::Tsp);
        c.reset = Some(ResetRule::LowestHalf);
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn obp_or_needs_a_path() {
        assert!(RunConfig::from_toml_str("task = \"obp_or\"").is_err());
    }
}
