//! File-backed session store: one directory per session, state derived
//! purely from which artifacts exist on disk.
//!
//! ```text
//! {data_dir}/sessions/{session_id}/
//!   session.json     immutable metadata, written at creation
//!   gaze.csv         raw upload                 -> GAZE_UPLOADED
//!   metrics.json     canonical attention report -> METRICS_READY
//!   quiz_plan.json   allocation
//!   quiz.json        generated quiz             -> QUIZ_READY
//!   chat.jsonl       running chat log
//!   chatquiz.json    confusion report + follow-up quiz
//! ```
//!
//! Artifacts are written to a temp file and renamed into place, so a
//! crash never leaves a partially written state marker.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lectern_engine::quiz::QuizMode;
use serde::{Deserialize, Serialize};

pub const SESSION_FILE: &str = "session.json";
pub const GAZE_FILE: &str = "gaze.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const QUIZ_PLAN_FILE: &str = "quiz_plan.json";
pub const QUIZ_FILE: &str = "quiz.json";
pub const CHAT_FILE: &str = "chat.jsonl";
pub const CHATQUIZ_FILE: &str = "chatquiz.json";

/// Monotone per-session pipeline state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    Created,
    GazeUploaded,
    MetricsReady,
    QuizReady,
}

impl SessionState {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionState::Created => "CREATED",
            SessionState::GazeUploaded => "GAZE_UPLOADED",
            SessionState::MetricsReady => "METRICS_READY",
            SessionState::QuizReady => "QUIZ_READY",
        }
    }
}

/// Immutable session metadata persisted at creation time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub lecture_id: String,
    pub group_mode: QuizMode,
    pub created_at_ms: u64,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes via a temp file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> std::io::Result<Self> {
        let root = data_dir.join("sessions");
        std::fs::create_dir_all(&root)?;
        Ok(SessionStore { root, locks: Mutex::new(HashMap::new()) })
    }

    pub fn session_dir(&self, session_id: &str) -> PathBuf {
        self.root.join(session_id)
    }

    /// Exclusive per-session guard; requests for distinct sessions run
    /// concurrently, requests for one session serialize on this.
    pub fn lock(&self, session_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock map poisoned");
        locks.entry(session_id.to_string()).or_default().clone()
    }

    pub fn create(&self, meta: &SessionMeta) -> std::io::Result<()> {
        let dir = self.session_dir(&meta.session_id);
        std::fs::create_dir_all(&dir)?;
        let bytes = serde_json::to_vec_pretty(meta).expect("meta serialization is infallible");
        write_atomic(&dir.join(SESSION_FILE), &bytes)
    }

    pub fn meta(&self, session_id: &str) -> Option<SessionMeta> {
        let text = std::fs::read_to_string(self.session_dir(session_id).join(SESSION_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Reconstructs the state purely from directory contents.
    pub fn state_of(&self, session_id: &str) -> Option<SessionState> {
        let dir = self.session_dir(session_id);
        if !dir.join(SESSION_FILE).exists() {
            return None;
        }
        Some(if dir.join(QUIZ_FILE).exists() {
            SessionState::QuizReady
        } else if dir.join(METRICS_FILE).exists() {
            SessionState::MetricsReady
        } else if dir.join(GAZE_FILE).exists() {
            SessionState::GazeUploaded
        } else {
            SessionState::Created
        })
    }

    pub fn artifact(&self, session_id: &str, name: &str) -> std::io::Result<Vec<u8>> {
        std::fs::read(self.session_dir(session_id).join(name))
    }

    pub fn artifact_string(&self, session_id: &str, name: &str) -> std::io::Result<String> {
        std::fs::read_to_string(self.session_dir(session_id).join(name))
    }

    pub fn has_artifact(&self, session_id: &str, name: &str) -> bool {
        self.session_dir(session_id).join(name).exists()
    }

    pub fn write_artifact(&self, session_id: &str, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.session_dir(session_id).join(name), bytes)
    }

    pub fn append_chat(&self, session_id: &str, lines: &str) -> std::io::Result<()> {
        use std::io::Write;
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.session_dir(session_id).join(CHAT_FILE))?;
        file.write_all(lines.as_bytes())
    }

    /// All session ids present on disk, sorted for stable iteration.
    pub fn list(&self) -> std::io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join(SESSION_FILE).exists() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }
}
