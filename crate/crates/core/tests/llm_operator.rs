use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use heurevo_core::rng::seeded;
use heurevo_core::variation::{EndpointConfig, LlmOperator, PromptTemplate, Sampling, VariationOperator};
use heurevo_core::{Candidate, CandidateKind, ParentPair};
use serde_json::{json, Value};

/// Minimal HTTP server replying with scripted (status, body) pairs, then
/// repeating the last one. Returns the URL and the captured request bodies.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        let mut i = 0;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(serde_json::from_slice(&body).unwrap_or(Value::Null));
            let (status, text) = &script[i.min(script.len() - 1)];
            i += 1;
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (url, seen)
}

fn completion(content: &str) -> (u16, String) {
    (200, json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn parent(id: u64, source: &str) -> Candidate {
    Candidate {
        id,
        source: source.into(),
        kind: CandidateKind::External,
        score_vector: vec![0.0],
        score: 0.0,
        length_chars: source.len(),
        parent_ids: vec![],
        birth_step: 0,
    }
}

fn pair() -> ParentPair {
    ParentPair {
        island: 0,
        first: parent(1, "return bins - item"),
        second: parent(2, "return -(bins - item)"),
    }
}

fn operator(url: String) -> LlmOperator {
    let endpoint = EndpointConfig {
        url,
        model: "m".into(),
        token: Some("secret".into()),
        request_timeout: Duration::from_secs(5),
        max_retries: 2,
        initial_backoff: Duration::from_millis(10),
        max_backoff: Duration::from_millis(20),
        transcripts: None,
    };
    LlmOperator::new(PromptTemplate::builtin("obp").unwrap(), endpoint)
}

fn sampling(n: usize) -> Sampling {
    Sampling {
        n_samples: n,
        top_p: 0.95,
        temperature: 1.0,
    }
}

#[test]
fn echo_endpoint_yields_n_bodies() {
    let (url, seen) = serve(vec![completion(
        "```python\ndef priority_v2(item, bins):\n    return bins * 2\n```",
    )]);
    let op = operator(url);
    let out = op.propose(&pair(), &sampling(4), &mut seeded(0, 0));
    assert_eq!(out.sources, vec!["return bins * 2"; 4]);
    assert_eq!(out.dropped, 0);
    let reqs = seen.lock().unwrap();
    assert_eq!(reqs.len(), 4);
    assert_eq!(reqs[0]["model"], "m");
    assert_eq!(reqs[0]["top_p"], 0.95);
    assert_eq!(reqs[0]["n"], 1);
    let prompt = reqs[0]["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("  return bins - item\n"));
    assert!(prompt.contains("  return -(bins - item)\n"));
}

#[test]
fn prose_counts_as_extraction_failure() {
    let (url, _) = serve(vec![completion("Prefer the fullest bin that still fits.")]);
    let op = operator(url);
    let out = op.propose(&pair(), &sampling(1), &mut seeded(0, 0));
    assert!(out.sources.is_empty());
    assert_eq!(out.dropped, 1);
    assert_eq!(op.counters().extraction_failures(), 1);
}

#[test]
fn server_error_then_success_is_retried() {
    let (url, _) = serve(vec![
        (500, "{}".into()),
        completion("def priority_v2(item, bins):\n  return item\n"),
    ]);
    let op = operator(url);
    let out = op.propose(&pair(), &sampling(1), &mut seeded(0, 0));
    assert_eq!(out.sources, vec!["return item"]);
    assert_eq!(op.counters().retries(), 1);
}

#[test]
fn persistent_failure_drops_the_sample() {
    let (url, _) = serve(vec![(503, "{}".into())]);
    let op = operator(url);
    let out = op.propose(&pair(), &sampling(2), &mut seeded(0, 0));
    assert!(out.sources.is_empty());
    assert_eq!(out.dropped, 2);
    assert_eq!(op.counters().transport_failures(), 2);
    assert_eq!(op.counters().requests(), 6);
}

#[test]
fn unreachable_endpoint_is_not_fatal() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let op = operator(url);
    let out = op.propose(&pair(), &sampling(1), &mut seeded(0, 0));
    assert_eq!(out.dropped, 1);
    assert_eq!(op.counters().transport_failures(), 1);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, _) = serve(vec![(400, "{}".into())]);
    let op = operator(url);
    let out = op.propose(&pair(), &sampling(1), &mut seeded(0, 0));
    assert_eq!(out.dropped, 1);
    assert_eq!(op.counters().requests(), 1);
}
