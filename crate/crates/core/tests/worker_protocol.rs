use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use heurevo_core::eval::WorkerPool;
use heurevo_core::expr::{Binding, CompiledExpr};
use heurevo_core::{CandidateKind, Deadline, EvalFailure, EvalStatus, Evaluator, FailureKind, TaskHarness};
use serde_json::json;

/// Three instances; the score of instance i is the priority at x = i.
struct Toy;

impl TaskHarness for Toy {
    fn task_name(&self) -> &str {
        "toy"
    }

    fn instance_count(&self) -> usize {
        3
    }

    fn variables(&self) -> &[&'static str] {
        &["x"]
    }

    fn score_expression(&self, f: &CompiledExpr, deadline: &Deadline) -> Result<Vec<f64>, EvalFailure> {
        let mut out = Vec::new();
        for i in 0..3 {
            deadline.check()?;
            let v = f.eval(&[Binding::Scalar(i as f64)]).unwrap()[0];
            out.push(v);
        }
        Ok(out)
    }

    fn payload(&self) -> serde_json::Value {
        json!({ "instances": [0, 1, 2] })
    }

    fn seed_source(&self, _: CandidateKind) -> String {
        "0.0".into()
    }

    fn summarize(&self, _: &[f64]) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
}

fn mock_pool(capacity: usize) -> Arc<WorkerPool> {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mock_worker.py");
    Arc::new(
        WorkerPool::new(vec!["python3".into(), script.display().to_string()], capacity)
            .with_grace(Duration::from_millis(500)),
    )
}

fn evaluator(pool: Arc<WorkerPool>, timeout: Duration) -> Evaluator {
    Evaluator::new(Arc::new(Toy), timeout).with_workers(pool)
}

#[test]
fn expression_candidates() {
    let ev = Evaluator::new(Arc::new(Toy), Duration::from_secs(5));
    let ok = ev.evaluate("x * 2", CandidateKind::Expression);
    assert_eq!(ok.scores(), Some(&[0.0, 2.0, 4.0][..]));
    assert_eq!(ev.evaluate("x +", CandidateKind::Expression).status(), EvalStatus::SyntaxError);
    assert_eq!(ev.evaluate("y", CandidateKind::Expression).status(), EvalStatus::SyntaxError);
    assert_eq!(ev.evaluate("1 / x", CandidateKind::Expression).status(), EvalStatus::InvalidOutput);
    let deep = "-".repeat(10) + "x";
    assert_eq!(ev.evaluate(&deep, CandidateKind::Expression).status(), EvalStatus::SyntaxError);
}

#[test]
fn expression_evaluation_is_deterministic() {
    let ev = Evaluator::new(Arc::new(Toy), Duration::from_secs(5));
    let a = ev.evaluate("exp(x) / 3", CandidateKind::Expression);
    let b = ev.evaluate("exp(x) / 3", CandidateKind::Expression);
    let bits = |o: &heurevo_core::EvalOutcome| o.scores().unwrap().iter().map(|s| s.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn zero_timeout_expires() {
    let ev = Evaluator::new(Arc::new(Toy), Duration::ZERO);
    assert_eq!(ev.evaluate("x", CandidateKind::Expression).status(), EvalStatus::Timeout);
}

#[test]
fn ping_reports_version() {
    let pool = mock_pool(1);
    assert_eq!(pool.ping(Duration::from_secs(10)).unwrap(), "mock-1");
}

#[test]
fn external_success_and_error_kinds() {
    let ev = evaluator(mock_pool(2), Duration::from_secs(10));
    assert_eq!(ev.evaluate("0.5", CandidateKind::External).scores(), Some(&[0.5, 0.5, 0.5][..]));
    let e = ev.evaluate("raise", CandidateKind::External);
    assert_eq!(e.status(), EvalStatus::RuntimeError);
    let f = ev.evaluate("forbid", CandidateKind::External).result.unwrap_err();
    assert_eq!(f.kind, FailureKind::Runtime);
    assert!(f.message.contains("forbidden_access"));
    assert_eq!(ev.evaluate("short", CandidateKind::External).status(), EvalStatus::InvalidOutput);
    assert_eq!(ev.evaluate("stale", CandidateKind::External).scores(), Some(&[2.0, 2.0, 2.0][..]));
}

#[test]
fn hung_worker_times_out_and_is_replaced() {
    let pool = mock_pool(1);
    let ev = evaluator(pool.clone(), Duration::from_millis(300));
    let start = Instant::now();
    let out = ev.evaluate("hang", CandidateKind::External);
    assert_eq!(out.status(), EvalStatus::Timeout);
    assert!(start.elapsed() < Duration::from_secs(5));
    assert_eq!(pool.respawns(), 1);
    let ev = evaluator(pool, Duration::from_secs(10));
    assert_eq!(ev.evaluate("1.0", CandidateKind::External).status(), EvalStatus::Ok);
}

#[test]
fn crash_is_retried_once() {
    let dir = tempfile_dir();
    let marker = dir.join("crashed");
    let ev = evaluator(mock_pool(1), Duration::from_secs(10));
    let src = format!("crash_once:{}", marker.display());
    assert_eq!(ev.evaluate(&src, CandidateKind::External).status(), EvalStatus::Ok);
    let always = ev.evaluate("crash", CandidateKind::External).result.unwrap_err();
    assert_eq!(always.kind, FailureKind::Runtime);
    assert_eq!(ev.evaluate("3", CandidateKind::External).status(), EvalStatus::Ok);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn missing_worker_binary_is_a_runtime_error() {
    let pool = Arc::new(WorkerPool::new(vec!["/nonexistent/worker".into()], 1));
    let ev = evaluator(pool, Duration::from_secs(1));
    assert_eq!(ev.evaluate("1", CandidateKind::External).status(), EvalStatus::RuntimeError);
}

#[test]
fn concurrent_requests_share_the_pool() {
    let ev = Arc::new(evaluator(mock_pool(3), Duration::from_secs(10)));
    let handles: Vec<_> = (0..12)
        .map(|i| {
            let ev = ev.clone();
            std::thread::spawn(move || ev.evaluate(&format!("{i}"), CandidateKind::External))
        })
        .collect();
    for (i, h) in handles.into_iter().enumerate() {
        assert_eq!(h.join().unwrap().scores(), Some(&[i as f64; 3][..]));
    }
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heurevo-worker-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
