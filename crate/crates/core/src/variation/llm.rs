use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{extract_function, PromptTemplate, Proposals, Sampling, VariationOperator};
use crate::rng::Rng;
use crate::{CandidateKind, ParentPair};

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    /// Full chat-completions URL.
    pub url: String,
    pub model: String,
    pub token: Option<String>,
    pub request_timeout: Duration,
    /// Retries after the first attempt for transport errors, 429 and 5xx.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub transcripts: Option<PathBuf>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            token: None,
            request_timeout: Duration::from_secs(120),
            max_retries: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(16),
            transcripts: None,
        }
    }
}

/// Running totals, readable while samplers are active.
#[derive(Debug, Default)]
pub struct LlmCounters {
    pub requests: AtomicU64,
    pub retries: AtomicU64,
    pub transport_failures: AtomicU64,
    pub extraction_failures: AtomicU64,
}

impl LlmCounters {
    fn bump(c: &AtomicU64) -> u64 {
        c.fetch_add(1, Ordering::Relaxed)
    }

    pub fn transport_failures(&self) -> u64 {
        self.transport_failures.load(Ordering::Relaxed)
    }

    pub fn extraction_failures(&self) -> u64 {
        self.extraction_failures.load(Ordering::Relaxed)
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

/// Proposes candidates by prompting a chat-completion endpoint with both
/// parents. One request is sent per sample.
pub struct LlmOperator {
    template: PromptTemplate,
    endpoint: EndpointConfig,
    agent: ureq::Agent,
    counters: LlmCounters,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl LlmOperator {
    pub fn new(template: PromptTemplate, endpoint: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            template,
            endpoint,
            agent,
            counters: LlmCounters::default(),
        }
    }

    pub fn counters(&self) -> &LlmCounters {
        &self.counters
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    fn request_once(&self, prompt: &str, sampling: &Sampling) -> Result<String, Failure> {
        let body = json!({
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": sampling.temperature,
            "top_p": sampling.top_p,
            "n": 1,
        });
        let mut req = self.agent.post(&self.endpoint.url);
        if let Some(token) = &self.endpoint.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Failure::Fatal(format!("HTTP {status}")));
        }
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Failure::Fatal(format!("unreadable body: {e}")))?;
        let choice = &v["choices"][0];
        choice["message"]["content"]
            .as_str()
            .or_else(|| choice["text"].as_str())
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal("response carries no completion text".into()))
    }

    /// One completion with retries; `None` once attempts are exhausted.
    fn complete(&self, prompt: &str, sampling: &Sampling) -> Option<String> {
        let mut backoff = self.endpoint.initial_backoff;
        for attempt in 0..=self.endpoint.max_retries {
            LlmCounters::bump(&self.counters.requests);
            match self.request_once(prompt, sampling) {
                Ok(text) => return Some(text),
                Err(Failure::Fatal(why)) => {
                    log::warn!("completion request failed: {why}");
                    return None;
                }
                Err(Failure::Retryable(why)) => {
                    log::debug!("completion attempt {attempt} failed: {why}");
                    if attempt < self.endpoint.max_retries {
                        LlmCounters::bump(&self.counters.retries);
                        std::thread::sleep(backoff);
                        backoff = (backoff * 2).min(self.endpoint.max_backoff);
                    }
                }
            }
        }
        None
    }

    fn record(&self, prompt: &str, response: Option<&str>) {
        let Some(dir) = &self.endpoint.transcripts else {
            return;
        };
        let n = self.counters.requests();
        let entry = json!({ "prompt": prompt, "response": response });
        let path = dir.join(format!("{n:08}-{}.json", std::process::id()));
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, entry.to_string())) {
            log::warn!("cannot write transcript {}: {e}", path.display());
        }
    }
}

impl VariationOperator for LlmOperator {
    fn kind(&self) -> CandidateKind {
        CandidateKind::External
    }

    fn propose(&self, parents: &ParentPair, sampling: &Sampling, _rng: &mut Rng) -> Proposals {
        let prompt = self.template.render(&parents.first.source, &parents.second.source);
        let mut out = Proposals::default();
        for _ in 0..sampling.n_samples {
            let Some(text) = self.complete(&prompt, sampling) else {
                LlmCounters::bump(&self.counters.transport_failures);
                self.record(&prompt, None);
                out.dropped += 1;
                continue;
            };
            self.record(&prompt, Some(&text));
            match extract_function(&text, self.template.v2_name()) {
                Ok(body) => out.sources.push(body),
                Err(e) => {
                    log::debug!("extraction failed: {e}");
                    LlmCounters::bump(&self.counters.extraction_failures);
                    out.dropped += 1;
                }
            }
        }
        out
    }
}
