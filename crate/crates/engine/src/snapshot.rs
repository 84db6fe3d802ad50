//! Self-describing JSON checkpoints.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::engine::RunState;
use crate::EngineError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u32,
    /// Seconds since the Unix epoch; the only field allowed to differ
    /// between two saves of the same state.
    pub created_at: u64,
    pub config: RunConfig,
    pub state: RunState,
}

impl Snapshot {
    pub fn new(config: RunConfig, state: RunState) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            config,
            state,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| EngineError::Snapshot(format!("not a snapshot: {e}")))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(EngineError::Snapshot(format!(
                    "snapshot format {v} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(EngineError::Snapshot("missing format_version".into())),
        }
        let snap: Self = serde_json::from_value(value).map_err(|e| EngineError::Snapshot(e.to_string()))?;
        snap.config.validate()?;
        Ok(snap)
    }

    /// Writes to a sibling temporary file first, so a failed write never
    /// leaves a truncated snapshot behind.
    pub fn write(&self, path: &Path) -> Result<(), EngineError> {
        let fail = |e: std::io::Error| EngineError::Snapshot(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(fail)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()).map_err(fail)?;
        std::fs::rename(&tmp, path).map_err(fail)
    }

    pub fn read(path: &Path) -> Result<Self, EngineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| EngineError::Snapshot(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Hash of config and state; ignores `created_at`.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.format_version.hash(&mut h);
        serde_json::to_string(&self.config).expect("serializes").hash(&mut h);
        state_digest(&self.state).hash(&mut h);
        h.finish()
    }
}

pub fn state_digest(state: &RunState) -> u64 {
    let mut h = DefaultHasher::new();
    serde_json::to_string(state).expect("state serializes").hash(&mut h);
    h.finish()
}
