//! Engine side of the external worker protocol.
//!
//! Each message is one frame: the decimal byte length of a UTF-8 JSON body,
//! a single space, the body, and a newline.
//!
//! ```text
//! -> {"type":"evaluate","id":"7","source":"...","task":"obp","payload":{...},"timeout_s":30}
//! <- {"type":"result","id":"7","ok":true,"scores":[...],"stderr_excerpt":""}
//! <- {"type":"result","id":"7","ok":false,"error_kind":"exception","stderr_excerpt":"..."}
//! -> {"type":"ping"}
//! <- {"type":"pong","version":"1"}
//! ```
//!
//! Error kinds are `syntax`, `exception`, `timeout`, `invalid_output` and
//! `forbidden_access`. Workers handle one request at a time. A worker that
//! overruns its timeout by more than the grace period is killed and replaced;
//! a worker that dies mid-request is replaced and the request retried once.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EvalFailure, FailureKind};

/// Largest frame accepted from a worker.
const MAX_FRAME: usize = 64 << 20;

pub struct Frame;

impl Frame {
    pub fn encode(body: &[u8]) -> Vec<u8> {
        let mut out = format!("{} ", body.len()).into_bytes();
        out.extend_from_slice(body);
        out.push(b'\n');
        out
    }

    /// Reads one frame; `Ok(None)` on clean end of stream.
    pub fn read(r: &mut impl BufRead) -> io::Result<Option<Vec<u8>>> {
        let mut prefix = Vec::new();
        let n = r.read_until(b' ', &mut prefix)?;
        if n == 0 {
            return Ok(None);
        }
        if prefix.last() != Some(&b' ') {
            return Err(bad("truncated length prefix"));
        }
        prefix.pop();
        let len: usize = std::str::from_utf8(&prefix)
            .ok()
            .and_then(|s| s.trim_start_matches('\n').parse().ok())
            .ok_or_else(|| bad("malformed length prefix"))?;
        if len > MAX_FRAME {
            return Err(bad("frame too large"));
        }
        let mut body = vec![0; len];
        r.read_exact(&mut body)?;
        let mut nl = [0u8];
        r.read_exact(&mut nl)?;
        if nl[0] != b'\n' {
            return Err(bad("frame not newline-terminated"));
        }
        Ok(Some(body))
    }
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

#[derive(Debug, Serialize)]
pub struct WorkRequest<'a> {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub id: &'a str,
    pub source: &'a str,
    pub task: &'a str,
    pub payload: &'a serde_json::Value,
    pub timeout_s: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct WorkResponse {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub ok: Option<bool>,
    #[serde(default)]
    pub scores: Option<Vec<f64>>,
    #[serde(default)]
    pub error_kind: Option<String>,
    #[serde(default)]
    pub stderr_excerpt: Option<String>,
    #[serde(default)]
    pub version: Option<String>,
}

impl WorkResponse {
    /// Maps a `result` message onto the evaluation taxonomy.
    pub fn into_result(self) -> Result<Vec<f64>, EvalFailure> {
        let excerpt = self.stderr_excerpt.unwrap_or_default();
        if self.ok == Some(true) {
            return self
                .scores
                .ok_or_else(|| EvalFailure::invalid("worker reported success without scores"));
        }
        let kind = match self.error_kind.as_deref() {
            Some("syntax") => FailureKind::Syntax,
            Some("timeout") => FailureKind::Timeout,
            Some("invalid_output") => FailureKind::InvalidOutput,
            Some("forbidden_access") => {
                return Err(EvalFailure::new(FailureKind::Runtime, format!("forbidden_access: {excerpt}")))
            }
            _ => FailureKind::Runtime,
        };
        Err(EvalFailure::new(kind, excerpt))
    }
}

type Incoming = Result<Vec<u8>, String>;

struct Worker {
    child: Child,
    stdin: ChildStdin,
    rx: Receiver<Incoming>,
}

impl Worker {
    fn spawn(command: &[String]) -> io::Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty worker command"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let msg = match Frame::read(&mut reader) {
                    Ok(Some(body)) => Ok(body),
                    Ok(None) => Err("worker closed its output".to_string()),
                    Err(e) => Err(e.to_string()),
                };
                let stop = msg.is_err();
                if tx.send(msg).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, rx })
    }

    fn send(&mut self, body: &[u8]) -> io::Result<()> {
        self.stdin.write_all(&Frame::encode(body))?;
        self.stdin.flush()
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct PoolState {
    idle: Vec<Worker>,
    live: usize,
}

/// A bounded pool of worker processes launched from one command line.
pub struct WorkerPool {
    command: Vec<String>,
    capacity: usize,
    grace: Duration,
    state: Mutex<PoolState>,
    ready: Condvar,
    next_id: AtomicU64,
    respawns: AtomicU64,
}

enum Attempt {
    Done(Result<Vec<f64>, EvalFailure>),
    Crashed(String),
}

impl WorkerPool {
    pub fn new(command: Vec<String>, capacity: usize) -> Self {
        Self {
            command,
            capacity: capacity.max(1),
            grace: Duration::from_secs(1),
            state: Mutex::new(PoolState {
                idle: Vec::new(),
                live: 0,
            }),
            ready: Condvar::new(),
            next_id: AtomicU64::new(0),
            respawns: AtomicU64::new(0),
        }
    }

    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }

    /// Workers discarded after a crash or timeout.
    pub fn respawns(&self) -> u64 {
        self.respawns.load(Ordering::Relaxed)
    }

    fn checkout(&self) -> io::Result<Worker> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(w) = st.idle.pop() {
                return Ok(w);
            }
            if st.live < self.capacity {
                st.live += 1;
                drop(st);
                return Worker::spawn(&self.command).inspect_err(|_| self.discard());
            }
            st = self.ready.wait(st).unwrap();
        }
    }

    fn checkin(&self, w: Worker) {
        self.state.lock().unwrap().idle.push(w);
        self.ready.notify_one();
    }

    fn discard(&self) {
        self.state.lock().unwrap().live -= 1;
        self.ready.notify_one();
    }

    fn retire(&self, w: Worker) {
        drop(w);
        self.respawns.fetch_add(1, Ordering::Relaxed);
        self.discard();
    }

    /// Sends one evaluation request and waits for the matching response.
    pub fn evaluate(
        &self,
        source: &str,
        task: &str,
        payload: &serde_json::Value,
        timeout: Duration,
    ) -> Result<Vec<f64>, EvalFailure> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        let req = WorkRequest {
            kind: "evaluate",
            id: &id,
            source,
            task,
            payload,
            timeout_s: timeout.as_secs_f64().ceil() as u64,
        };
        let body = serde_json::to_vec(&req).expect("request serializes");
        let mut last = String::new();
        for _ in 0..2 {
            match self.attempt(&id, &body, timeout) {
                Attempt::Done(r) => return r,
                Attempt::Crashed(why) => {
                    log::warn!("worker crashed on request {id}: {why}");
                    last = why;
                }
            }
        }
        Err(EvalFailure::new(FailureKind::Runtime, format!("worker crashed: {last}")))
    }

    fn attempt(&self, id: &str, body: &[u8], timeout: Duration) -> Attempt {
        let mut w = match self.checkout() {
            Ok(w) => w,
            Err(e) => {
                return Attempt::Done(Err(EvalFailure::new(
                    FailureKind::Runtime,
                    format!("cannot start worker: {e}"),
                )))
            }
        };
        if let Err(e) = w.send(body) {
            self.retire(w);
            return Attempt::Crashed(e.to_string());
        }
        let deadline = Instant::now() + timeout + self.grace;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match w.rx.recv_timeout(left) {
                Ok(Ok(frame)) => {
                    let resp: WorkResponse = match serde_json::from_slice(&frame) {
                        Ok(r) => r,
                        Err(e) => {
                            self.checkin(w);
                            return Attempt::Done(Err(EvalFailure::invalid(format!("unreadable response: {e}"))));
                        }
                    };
                    if resp.kind != "result" || resp.id.as_deref() != Some(id) {
                        continue;
                    }
                    self.checkin(w);
                    return Attempt::Done(resp.into_result());
                }
                Ok(Err(why)) => {
                    self.retire(w);
                    return Attempt::Crashed(why);
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.retire(w);
                    return Attempt::Done(Err(EvalFailure::timeout()));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.retire(w);
                    return Attempt::Crashed("worker output closed".into());
                }
            }
        }
    }

    /// Health check; returns the worker's reported version.
    pub fn ping(&self, timeout: Duration) -> Result<String, String> {
        let mut w = self.checkout().map_err(|e| e.to_string())?;
        if let Err(e) = w.send(br#"{"type":"ping"}"#) {
            self.retire(w);
            return Err(e.to_string());
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match w.rx.recv_timeout(left) {
                Ok(Ok(frame)) => {
                    if let Ok(resp) = serde_json::from_slice::<WorkResponse>(&frame) {
                        if resp.kind == "pong" {
                            self.checkin(w);
                            return Ok(resp.version.unwrap_or_default());
                        }
                    }
                }
                Ok(Err(why)) => {
                    self.retire(w);
                    return Err(why);
                }
                Err(e) => {
                    self.retire(w);
                    return Err(e.to_string());
                }
            }
        }
    }
}
