//! Builds the task harness, evaluator and variation operator a config asks for.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use heurevo_core::eval::WorkerPool;
use heurevo_core::rng::seeded;
use heurevo_core::variation::{EndpointConfig, LlmOperator, PromptTemplate, StubOperator, VariationOperator};
use heurevo_core::{Evaluator, TaskHarness};
use heurevo_tasks::obp::{generate_weibull, parse_or_library};
use heurevo_tasks::tsp::TspInstance;
use heurevo_tasks::{CapsetHarness, ObpHarness, TspHarness};

use crate::config::{OperatorKind, RunConfig, TaskKind};
use crate::EngineError;

pub struct Components {
    pub harness: Arc<dyn TaskHarness>,
    pub evaluator: Arc<Evaluator>,
    pub operator: Arc<dyn VariationOperator>,
    /// Same operator as `operator` when it talks to an endpoint.
    pub llm: Option<Arc<LlmOperator>>,
    pub workers: Option<Arc<WorkerPool>>,
}

fn task_err(e: impl std::fmt::Display) -> EngineError {
    EngineError::Task(e.to_string())
}

fn read(path: &Path) -> Result<String, EngineError> {
    std::fs::read_to_string(path).map_err(|e| EngineError::Task(format!("{}: {e}", path.display())))
}

pub fn build_harness(cfg: &RunConfig) -> Result<Arc<dyn TaskHarness>, EngineError> {
    Ok(match cfg.task {
        TaskKind::ObpOr => {
            let path = cfg.obp_or.path.as_ref().expect("validated");
            let instances = parse_or_library(&read(path)?).map_err(task_err)?;
            Arc::new(ObpHarness::new(instances).map_err(task_err)?)
        }
        TaskKind::ObpWeibull => {
            let w = &cfg.obp_weibull;
            let instances = generate_weibull(w.count, w.n_items, &mut seeded(w.dataset_seed, 0));
            Arc::new(ObpHarness::new(instances).map_err(task_err)?)
        }
        TaskKind::Capset => Arc::new(CapsetHarness::new(cfg.capset.n).map_err(task_err)?),
        TaskKind::Tsp => {
            let t = &cfg.tsp;
            let instances: Vec<TspInstance> = match &t.path {
                Some(p) => serde_json::from_str(&read(p)?)
                    .map_err(|e| EngineError::Task(format!("{}: {e}", p.display())))?,
                None => {
                    let mut rng = seeded(t.dataset_seed, 0);
                    (0..t.count).map(|_| TspInstance::random(t.cities, &mut rng)).collect()
                }
            };
            Arc::new(TspHarness::new(instances, t.max_iterations).map_err(task_err)?)
        }
    })
}

fn template_task(task: TaskKind) -> &'static str {
    match task {
        TaskKind::ObpOr | TaskKind::ObpWeibull => "obp",
        TaskKind::Capset => "capset",
        TaskKind::Tsp => "tsp",
    }
}

pub fn build(cfg: &RunConfig) -> Result<Components, EngineError> {
    let harness = build_harness(cfg)?;
    let timeout = Duration::from_secs_f64(cfg.timeout_s);
    let mut evaluator = Evaluator::new(harness.clone(), timeout).with_max_depth(cfg.max_depth);
    let mut workers = None;
    if !cfg.worker.command.is_empty() {
        let pool = Arc::new(WorkerPool::new(cfg.worker.command.clone(), cfg.evaluators));
        evaluator = evaluator.with_workers(pool.clone());
        workers = Some(pool);
    }

    let (operator, llm): (Arc<dyn VariationOperator>, _) = match cfg.operator {
        OperatorKind::Stub => (
            Arc::new(StubOperator::new(harness.variables()).with_max_depth(cfg.max_depth)),
            None,
        ),
        OperatorKind::Llm => {
            let template = PromptTemplate::builtin(template_task(cfg.task)).expect("builtin template");
            let e = &cfg.endpoint;
            let endpoint = EndpointConfig {
                url: e.url.clone(),
                model: e.model.clone(),
                token: std::env::var(&e.token_env).ok(),
                request_timeout: Duration::from_secs_f64(e.request_timeout_s),
                max_retries: e.max_retries,
                transcripts: e.transcripts.clone(),
                ..EndpointConfig::default()
            };
            let op = Arc::new(LlmOperator::new(template, endpoint));
            (op.clone(), Some(op))
        }
    };
    Ok(Components {
        harness,
        evaluator: Arc::new(evaluator),
        operator,
        llm,
        workers,
    })
}
