use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;

use heurevo::snapshot::state_digest;
use heurevo::{Engine, EngineError, RunConfig, Snapshot};

/// OBP toy dataset with `extra` keys overriding the base settings.
fn toy(extra: &str) -> RunConfig {
    let mut table: toml::Table = "task = \"obp_weibull\"\nevaluators = 1\ntotal_samples = 200\nreport_every = 50\nt_reset = 50\n[obp_weibull]\ncount = 20\nn_items = 30\n"
        .parse()
        .unwrap();
    table.extend(extra.parse::<toml::Table>().unwrap());
    RunConfig::from_table(table).unwrap()
}

#[test]
fn budget_is_exact_and_seeds_are_extra() {
    let mut e = Engine::new(toy("")).unwrap();
    let report = e.run().unwrap();
    assert_eq!(report.registrations, 200);
    assert_eq!(report.t, 210);
    assert!(report.evaluations >= 200);
    let failures: u64 = report.failures.values().sum();
    assert_eq!(report.evaluations, 200 + failures);
    assert_eq!(e.events().len() as u64, report.evaluations);
    e.database().check_invariants().unwrap();
}

#[test]
fn reset_cadence_fires_after_every_window_but_the_last() {
    let mut e = Engine::new(toy("islands = 10")).unwrap();
    let report = e.run().unwrap();
    assert_eq!(report.resets, 3);
    let rows = e.metrics();
    assert_eq!(rows.iter().map(|r| r.t).collect::<Vec<_>>(), vec![60, 110, 160, 210]);
    assert_eq!(rows.last().unwrap().islands_reset_cumulative, report.islands_reset);
    assert!(rows.windows(2).all(|w| w[0].global_best <= w[1].global_best));
}

#[test]
fn single_island_never_resets() {
    let cfg = RunConfig::from_toml_str("task = \"capset\"\nislands = 1\nevaluators = 1\ntotal_samples = 100\n[capset]\nn = 3\n")
        .unwrap();
    let report = Engine::new(cfg).unwrap().run().unwrap();
    assert_eq!(report.resets, 0);
    assert!(report.summary["capset_size"] >= 1.0);
}

#[test]
fn repeated_runs_are_identical() {
    let a = Engine::new(toy("seed = 3")).unwrap().run().unwrap().to_json();
    let b = Engine::new(toy("seed = 3")).unwrap().run().unwrap().to_json();
    assert_eq!(a, b);
    let c = Engine::new(toy("seed = 4")).unwrap().run().unwrap().to_json();
    assert_ne!(a, c);
}

#[test]
fn restore_continues_identically() {
    let mut whole = Engine::new(toy("")).unwrap();
    let full = whole.run().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.json");
    let mut first = Engine::new(toy("")).unwrap();
    first.run_sequential(100).unwrap();
    first.snapshot().write(&path).unwrap();
    drop(first);

    let mut resumed = Engine::from_snapshot(Snapshot::read(&path).unwrap()).unwrap();
    assert_eq!(resumed.counters().registrations, 100);
    let rest = resumed.run().unwrap();
    assert_eq!(full.to_json(), rest.to_json());
    assert_eq!(state_digest(&whole.state()), state_digest(&resumed.state()));
}

#[test]
fn snapshot_round_trip_is_byte_identical() {
    let mut e = Engine::new(toy("islands = 10")).unwrap();
    e.run_sequential(120).unwrap();
    let snap = e.snapshot();
    let text = snap.to_json();
    let back = Snapshot::from_json(&text).unwrap();
    assert_eq!(back.to_json(), text);
    assert_eq!(back.digest(), snap.digest());
    let later = Snapshot::new(back.config.clone(), back.state.clone());
    assert_eq!(later.digest(), snap.digest());
}

#[test]
fn bad_snapshots_are_refused() {
    let e = Engine::new(toy("")).unwrap();
    let text = e.snapshot().to_json();
    let truncated = &text[..text.len() / 2];
    assert!(matches!(Snapshot::from_json(truncated), Err(EngineError::Snapshot(_))));
    let future = text.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    let err = Snapshot::from_json(&future).unwrap_err().to_string();
    assert!(err.contains("99"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    assert!(Snapshot::read(&dir.path().join("missing.json")).is_err());
}

#[test]
fn periodic_snapshots_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy("snapshot_every = 100");
    cfg.output_dir = Some(dir.path().to_path_buf());
    Engine::new(cfg).unwrap().run().unwrap();
    let snaps = dir.path().join("snapshots");
    for n in [100, 200] {
        let s = Snapshot::read(&snaps.join(format!("snapshot_{n:08}.json"))).unwrap();
        assert_eq!(s.state.counters.registrations, n);
    }
}

#[test]
fn unwritable_snapshot_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let mut cfg = toy("snapshot_every = 10");
    cfg.output_dir = Some(blocker);
    assert!(matches!(Engine::new(cfg).unwrap().run(), Err(EngineError::Snapshot(_))));
}

#[test]
fn threaded_mode_respects_the_budget() {
    let mut e = Engine::new(toy("islands = 4\nevaluators = 4\nsamplers = 3")).unwrap();
    let report = e.run().unwrap();
    assert_eq!(report.registrations, 200);
    assert_eq!(report.t, 204);
    assert_eq!(report.resets, 3);
    e.database().check_invariants().unwrap();
}

#[test]
fn unevaluable_seed_is_a_configuration_error() {
    let cfg = toy("operator = \"llm\"\ntimeout_s = 2\nworker = { command = [\"false\"] }");
    assert!(matches!(Engine::new(cfg), Err(EngineError::Seed(_))));
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

/// Serves the same chat completion forever.
fn completion_server(content: &str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line.trim_end().is_empty() {
                    break;
                }
                if let Some((k, v)) = line.trim_end().split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut req = vec![0; len];
            let _ = reader.read_exact(&mut req);
            let resp = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    url
}

#[test]
fn llm_operator_runs_through_workers() {
    let url = completion_server("```python\ndef priority_v2(item, bins):\n    return 0.25\n```");
    let mut cfg = toy(&format!(
        "operator = \"llm\"\nn_samples = 2\ntotal_samples = 10\nt_reset = 5\nworker = {{ command = [\"python3\", {:?}] }}",
        fixture("const_worker.py")
    ));
    cfg.endpoint.url = url;
    let report = Engine::new(cfg).unwrap().run().unwrap();
    assert_eq!(report.registrations, 10);
    assert_eq!(report.best_score, 0.25);
    assert_eq!(report.best_source, "return 0.25");
    let llm = report.llm.unwrap();
    assert_eq!(llm.requests, 10);
    assert_eq!(llm.extraction_failures, 0);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heurevo"))
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        "task = \"obp_weibull\"\nevaluators = 1\ntotal_samples = 60\nreport_every = 20\nt_reset = 30\n[obp_weibull]\ncount = 4\nn_items = 30\n",
    )
    .unwrap();
    path
}

#[test]
fn cli_run_report_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "7", "--operator", "stub", "--out"])
        .arg(&out)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["registrations"], 60);
    assert_eq!(String::from_utf8(st.stdout).unwrap(), std::fs::read_to_string(out.join("report.json")).unwrap());

    let plots = dir.path().join("plots");
    let st = bin().args(["report", "--csv"]).arg(out.join("metrics.csv")).arg("--plots").arg(&plots).output().unwrap();
    assert!(st.status.success());
    assert!(std::fs::read_to_string(plots.join("global_best.svg")).unwrap().starts_with("<svg"));

    let st = bin().args(["inspect", "--snapshot"]).arg(out.join("final_snapshot.json")).output().unwrap();
    assert!(st.status.success());
    let text = String::from_utf8(st.stdout).unwrap();
    assert!(text.contains("registrations  60 / 60"), "{text}");

    let resumed = dir.path().join("resumed");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--resume")
        .arg(out.join("final_snapshot.json"))
        .arg("--out")
        .arg(&resumed)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(st.status.success());
    assert_eq!(
        std::fs::read_to_string(resumed.join("report.json")).unwrap(),
        std::fs::read_to_string(out.join("report.json")).unwrap()
    );
}

#[test]
fn cli_sweep_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let st = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--param", "k", "--values", "0.0,0.5", "--runs", "2"])
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let text = String::from_utf8(st.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,seed,best_score,registrations,resets");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.0,0,") && lines[4].starts_with("0.5,1,"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "task = \"tsp\"\nislands = 3\nt_reset = \"none\"\n").unwrap();
    let st = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert!(!st.status.success());
    assert!(String::from_utf8_lossy(&st.stderr).contains("t_reset"));
}
