//! The evolution loop.
//!
//! With one evaluator the loop is a single thread: select, propose, then
//! evaluate and register each proposal in order. Everything is driven by
//! seeded streams, so the run is reproducible and a snapshot taken between
//! registrations resumes exactly. With more evaluators, sampler threads
//! select and propose while evaluator threads score and register; the
//! database sits behind one lock so each select or register is atomic.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crossbeam_channel::{bounded, RecvTimeoutError, SendTimeoutError};
use heurevo_core::metrics::{recent_best_score, recent_proportion_of_change, EventRecord, MetricRow, SampleEvent, DEFAULT_WINDOW};
use heurevo_core::rng::{seeded, Rng, RngState};
use heurevo_core::{CandidateId, CandidateKind, Database, EvalFailure, NewCandidate, ParentPair};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::RunReport;
use crate::setup::{build, Components};
use crate::snapshot::Snapshot;
use crate::EngineError;

/// A proposal waiting for evaluation, with what registration needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    pub island: usize,
    pub parent_ids: Vec<CandidateId>,
    pub parent_sources: Vec<String>,
    pub source: String,
}

impl Pending {
    fn new(pair: &ParentPair, source: String) -> Self {
        Self {
            island: pair.island,
            parent_ids: pair.ids(),
            parent_sources: vec![pair.first.source.clone(), pair.second.source.clone()],
            source,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    /// Registered offspring, seeds excluded.
    pub registrations: u64,
    pub evaluations: u64,
    /// Samples lost before evaluation (transport or extraction failures).
    pub dropped: u64,
    pub failures: BTreeMap<String, u64>,
    pub resets: u64,
    pub islands_reset: u64,
    pub since_reset: u64,
}

/// Everything that evolves during a run; serialized into snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunState {
    pub db: Database,
    pub db_rng: RngState,
    /// One stream per sampler; the sequential loop uses the first.
    pub sampler_rngs: Vec<RngState>,
    pub events: Vec<EventRecord>,
    pub metrics: Vec<MetricRow>,
    pub counters: Counters,
    pub pending: VecDeque<Pending>,
}

/// `RunState` with live generators.
struct Core {
    db: Database,
    db_rng: Rng,
    sampler_rngs: Vec<RngState>,
    events: Vec<EventRecord>,
    metrics: Vec<MetricRow>,
    counters: Counters,
    pending: VecDeque<Pending>,
}

impl Core {
    fn from_state(s: RunState) -> Result<Self, EngineError> {
        Ok(Self {
            db: s.db,
            db_rng: s.db_rng.restore().map_err(EngineError::Snapshot)?,
            sampler_rngs: s.sampler_rngs,
            events: s.events,
            metrics: s.metrics,
            counters: s.counters,
            pending: s.pending,
        })
    }

    fn state(&self) -> RunState {
        RunState {
            db: self.db.clone(),
            db_rng: RngState::capture(&self.db_rng),
            sampler_rngs: self.sampler_rngs.clone(),
            events: self.events.clone(),
            metrics: self.metrics.clone(),
            counters: self.counters.clone(),
            pending: self.pending.clone(),
        }
    }

    fn finished(&self, cfg: &RunConfig) -> bool {
        self.counters.registrations >= cfg.total_samples
            || self.counters.evaluations + self.counters.dropped >= cfg.evaluation_cap()
    }

    fn select(&mut self, cfg: &RunConfig) -> Result<ParentPair, EngineError> {
        let island = self.db.choose_island(&mut self.db_rng);
        Ok(self.db.select_parents(island, &cfg.priority(), &mut self.db_rng)?)
    }

    fn global_best(&self) -> f64 {
        self.db.best_candidate().map_or(f64::NEG_INFINITY, |c| c.score)
    }

    fn push_metrics(&mut self) {
        self.metrics.push(MetricRow {
            t: self.db.t(),
            global_best: self.global_best(),
            recent_best_score: recent_best_score(&self.events, DEFAULT_WINDOW),
            recent_proportion_of_change: recent_proportion_of_change(&self.events, DEFAULT_WINDOW),
            islands_reset_cumulative: self.counters.islands_reset,
        });
    }

    /// Applies one evaluation result. Returns true when it was registered.
    fn record(
        &mut self,
        cfg: &RunConfig,
        kind: CandidateKind,
        p: Pending,
        result: Result<Vec<f64>, EvalFailure>,
    ) -> Result<bool, EngineError> {
        self.counters.evaluations += 1;
        let scores = match result {
            Ok(s) => s,
            Err(f) => {
                log::debug!("candidate failed ({}): {}", f.kind.name(), f.message);
                *self.counters.failures.entry(f.kind.name().to_string()).or_insert(0) += 1;
                self.events.push(EventRecord::from(&SampleEvent::failure()));
                return Ok(false);
            }
        };
        let parents: Vec<&str> = p.parent_sources.iter().map(String::as_str).collect();
        let reg = self.db.register(
            p.island,
            NewCandidate {
                source: p.source.clone(),
                kind,
                score_vector: scores,
                parent_ids: p.parent_ids,
            },
        )?;
        let score = self.db.candidate(reg.id).expect("just registered").score;
        self.events.push(EventRecord::from(&SampleEvent::success(reg.id, score, &p.source, &parents)));
        self.counters.registrations += 1;
        self.counters.since_reset += 1;
        if self.counters.registrations.is_multiple_of(cfg.report_every) {
            self.push_metrics();
        }
        if self.counters.registrations < cfg.total_samples {
            if let Some(every) = cfg.t_reset {
                if self.counters.since_reset >= every {
                    let reset = self.db.reset_islands(&cfg.priority(), &mut self.db_rng);
                    log::info!("reset at t = {}: islands {:?}", self.db.t(), reset);
                    self.counters.resets += 1;
                    self.counters.islands_reset += reset.len() as u64;
                    self.counters.since_reset = 0;
                }
            }
        }
        Ok(true)
    }

    fn snapshot_due(&self, cfg: &RunConfig) -> bool {
        cfg.snapshot_every > 0 && cfg.output_dir.is_some() && self.counters.registrations.is_multiple_of(cfg.snapshot_every)
    }
}

pub struct Engine {
    cfg: RunConfig,
    parts: Components,
    core: Core,
}

impl Engine {
    /// Builds the task and seeds every island with its trivial candidate.
    pub fn new(cfg: RunConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let parts = build(&cfg)?;
        let harness = parts.harness.clone();
        let kind = parts.operator.kind();
        let seed_source = harness.seed_source(kind);
        let seed_scores = parts
            .evaluator
            .evaluate(&seed_source, kind)
            .result
            .map_err(|f| EngineError::Seed(format!("{}: {}", f.kind.name(), f.message)))?;
        let mut db = Database::new(cfg.islands, harness.instance_count());
        for island in 0..cfg.islands {
            db.register(island, NewCandidate::seed(seed_source.clone(), kind, seed_scores.clone()))?;
        }
        let core = Core {
            db,
            db_rng: seeded(cfg.seed, 0),
            sampler_rngs: (0..cfg.samplers as u64)
                .map(|i| RngState::capture(&seeded(cfg.seed, i + 1)))
                .collect(),
            events: Vec::new(),
            metrics: Vec::new(),
            counters: Counters::default(),
            pending: VecDeque::new(),
        };
        Ok(Self { cfg, parts, core })
    }

    pub fn from_snapshot(snap: Snapshot) -> Result<Self, EngineError> {
        snap.config.validate()?;
        let parts = build(&snap.config)?;
        if snap.state.db.instance_count() != parts.harness.instance_count() {
            return Err(EngineError::Snapshot(format!(
                "snapshot has {} instances, task has {}",
                snap.state.db.instance_count(),
                parts.harness.instance_count()
            )));
        }
        Ok(Self {
            cfg: snap.config,
            parts,
            core: Core::from_state(snap.state)?,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn database(&self) -> &Database {
        &self.core.db
    }

    pub fn counters(&self) -> &Counters {
        &self.core.counters
    }

    pub fn metrics(&self) -> &[MetricRow] {
        &self.core.metrics
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.core.events
    }

    pub fn state(&self) -> RunState {
        self.core.state()
    }

    pub fn components(&self) -> &Components {
        &self.parts
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::new(self.cfg.clone(), self.core.state())
    }

    pub fn is_finished(&self) -> bool {
        self.core.finished(&self.cfg)
    }

    /// Runs to the budget and returns the final report.
    pub fn run(&mut self) -> Result<RunReport, EngineError> {
        if self.cfg.evaluators == 1 {
            self.run_sequential(u64::MAX)?;
        } else {
            self.run_threaded()?;
        }
        Ok(self.finish())
    }

    /// Final metric row (if the last tick missed the end) and report.
    pub fn finish(&mut self) -> RunReport {
        let t = self.core.db.t();
        if self.core.metrics.last().is_none_or(|r| r.t != t) {
            self.core.push_metrics();
        }
        RunReport::build(self)
    }

    /// Single-threaded loop until `limit` registrations or the budget.
    pub fn run_sequential(&mut self, limit: u64) -> Result<(), EngineError> {
        let cfg = &self.cfg;
        let kind = self.parts.operator.kind();
        let sampling = cfg.sampling();
        let mut rng = self.core.sampler_rngs[0].restore().map_err(EngineError::Snapshot)?;
        while !self.core.finished(cfg) && self.core.counters.registrations < limit {
            let Some(p) = self.core.pending.pop_front() else {
                let pair = self.core.select(cfg)?;
                let props = self.parts.operator.propose(&pair, &sampling, &mut rng);
                self.core.sampler_rngs[0] = RngState::capture(&rng);
                self.core.counters.dropped += props.dropped as u64;
                self.core.pending.extend(props.sources.into_iter().map(|s| Pending::new(&pair, s)));
                continue;
            };
            let outcome = self.parts.evaluator.evaluate(&p.source, kind);
            if self.core.record(cfg, kind, p, outcome.result)? && self.core.snapshot_due(cfg) {
                write_periodic(cfg, &self.core)?;
            }
        }
        Ok(())
    }

    fn run_threaded(&mut self) -> Result<(), EngineError> {
        let Self { cfg, parts, core } = self;
        let cfg = &*cfg;
        // In-flight proposals are not part of the threaded state.
        let backlog: Vec<Pending> = core.pending.drain(..).collect();
        let kind = parts.operator.kind();
        let sampling = cfg.sampling();
        let mut rngs = Vec::with_capacity(core.sampler_rngs.len());
        for s in &core.sampler_rngs {
            rngs.push(s.restore().map_err(EngineError::Snapshot)?);
        }
        let shared = Mutex::new(&mut *core);
        let stop = AtomicBool::new(false);
        let error: Mutex<Option<EngineError>> = Mutex::new(None);
        let (tx, rx) = bounded::<Pending>(cfg.evaluators * 2);
        let poll = Duration::from_millis(50);

        let fail = |e: EngineError| {
            error.lock().unwrap().get_or_insert(e);
            stop.store(true, Ordering::SeqCst);
        };

        std::thread::scope(|scope| {
            for (i, mut rng) in rngs.into_iter().enumerate() {
                let tx = tx.clone();
                let (shared, stop, fail, operator) = (&shared, &stop, &fail, &parts.operator);
                let backlog = if i == 0 { backlog.clone() } else { Vec::new() };
                scope.spawn(move || {
                    let send = |mut p: Pending| loop {
                        match tx.send_timeout(p, poll) {
                            Ok(()) => return true,
                            Err(SendTimeoutError::Timeout(back)) if !stop.load(Ordering::SeqCst) => p = back,
                            Err(_) => return false,
                        }
                    };
                    for p in backlog {
                        if !send(p) {
                            return;
                        }
                    }
                    while !stop.load(Ordering::SeqCst) {
                        let pair = {
                            let mut c = shared.lock().unwrap();
                            if c.finished(cfg) {
                                stop.store(true, Ordering::SeqCst);
                                return;
                            }
                            match c.select(cfg) {
                                Ok(p) => p,
                                Err(e) => return fail(e),
                            }
                        };
                        let props = operator.propose(&pair, &sampling, &mut rng);
                        {
                            let mut c = shared.lock().unwrap();
                            c.sampler_rngs[i] = RngState::capture(&rng);
                            c.counters.dropped += props.dropped as u64;
                        }
                        for s in props.sources {
                            if !send(Pending::new(&pair, s)) {
                                return;
                            }
                        }
                    }
                });
            }
            drop(tx);

            for _ in 0..cfg.evaluators {
                let (rx, shared, stop, fail, evaluator) = (rx.clone(), &shared, &stop, &fail, &parts.evaluator);
                scope.spawn(move || loop {
                    let p = match rx.recv_timeout(poll) {
                        Ok(p) => p,
                        Err(RecvTimeoutError::Timeout) if !stop.load(Ordering::SeqCst) => continue,
                        Err(_) => return,
                    };
                    if stop.load(Ordering::SeqCst) {
                        continue; // drain
                    }
                    let outcome = evaluator.evaluate(&p.source, kind);
                    let mut c = shared.lock().unwrap();
                    if c.finished(cfg) {
                        stop.store(true, Ordering::SeqCst);
                        continue;
                    }
                    match c.record(cfg, kind, p, outcome.result) {
                        Ok(true) if c.snapshot_due(cfg) => {
                            if let Err(e) = write_periodic(cfg, &c) {
                                fail(e);
                            }
                        }
                        Ok(_) => {}
                        Err(e) => fail(e),
                    }
                    if c.finished(cfg) {
                        stop.store(true, Ordering::SeqCst);
                    }
                });
            }
        });

        match error.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn write_periodic(cfg: &RunConfig, core: &Core) -> Result<(), EngineError> {
    let dir = cfg.output_dir.as_deref().expect("checked by snapshot_due").join("snapshots");
    let path = dir.join(format!("snapshot_{:08}.json", core.counters.registrations));
    Snapshot::new(cfg.clone(), core.state()).write(&path)
}

/// Writes the report, metrics CSV and final snapshot into `dir`.
pub fn write_outputs(engine: &Engine, report: &RunReport, dir: &Path) -> Result<(), EngineError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    std::fs::write(dir.join("metrics.csv"), heurevo_core::metrics::write_csv(engine.metrics()))?;
    std::fs::write(dir.join("best.txt"), format!("{}\n", report.best_source))?;
    engine.snapshot().write(&dir.join("final_snapshot.json"))
}
