//! Live sessions and their JSON-lines logs.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tokio::sync::broadcast;

use crate::error::ApiError;
use crate::record::{
    BallotEvent, CreateSession, LogLine, SessionRecord, SessionStatus, Submission, SubmitResponse, Transcript,
};

/// Pushed to stream subscribers after every accepted submission.
#[derive(Debug, Clone, Serialize)]
pub struct StreamMessage {
    pub event: BallotEvent,
    pub status: SessionStatus,
}

struct Handle {
    /// Held for the whole of a write, including the log append.
    record: Mutex<SessionRecord>,
    /// Latest published status; readers never wait on a writer.
    status: RwLock<Arc<SessionStatus>>,
    tx: broadcast::Sender<Arc<StreamMessage>>,
    log: Option<PathBuf>,
}

pub struct Store {
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
    data_dir: Option<PathBuf>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ApiError {
    ApiError::internal(format!("{}: {e}", path.display()))
}

fn append(path: &Path, line: &LogLine, create: bool) -> Result<(), ApiError> {
    let mut text = serde_json::to_string(line).map_err(|e| ApiError::internal(e.to_string()))?;
    text.push('\n');
    let mut file = OpenOptions::new()
        .append(true)
        .create_new(create)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    file.sync_data().map_err(|e| io_err(path, e))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Replays one log file. A final line without its newline is a torn write
/// and is dropped.
pub fn load_log(path: &Path) -> Result<SessionRecord, ApiError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut lines = Vec::new();
    for line in reader.split(b'\n') {
        lines.push(line.map_err(|e| io_err(path, e))?);
    }
    let complete = fs::read(path).map_err(|e| io_err(path, e))?.ends_with(b"\n");
    if !complete {
        lines.pop();
    }
    let mut parsed = lines
        .iter()
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_slice::<LogLine>(l).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))
        });
    let Some(LogLine::Created { session_id, created_at_ms, request }) = parsed.next().transpose()? else {
        return Err(io_err(path, "log does not start with a created event"));
    };
    let events = parsed
        .map(|l| match l? {
            LogLine::Ballot(e) => Ok(e),
            LogLine::Created { .. } => Err(io_err(path, "repeated created event")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    SessionRecord::replay(session_id, created_at_ms, request, &events)
}

impl Store {
    /// An in-memory store, or one backed by `data_dir` whose existing logs
    /// are replayed.
    pub fn open(data_dir: Option<PathBuf>) -> Result<Self, ApiError> {
        let store = Self {
            sessions: RwLock::new(HashMap::new()),
            data_dir,
        };
        if let Some(dir) = &store.data_dir {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| io_err(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            for path in paths {
                let record = load_log(&path)?;
                store.insert(record);
            }
        }
        Ok(store)
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn insert(&self, record: SessionRecord) -> Arc<Handle> {
        let id = record.session_id.clone();
        let handle = Arc::new(Handle {
            status: RwLock::new(Arc::new(record.status())),
            record: Mutex::new(record),
            tx: broadcast::channel(256).0,
            log: self.log_path(&id),
        });
        self.sessions.write().expect("poisoned").insert(id, handle.clone());
        handle
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.sessions
            .read()
            .expect("poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn admit(&self, record: SessionRecord) -> Result<SessionStatus, ApiError> {
        let id = record.session_id.clone();
        if self.sessions.read().expect("poisoned").contains_key(&id) {
            return Err(ApiError::conflict(format!("session {id} already exists")));
        }
        if let Some(path) = self.log_path(&id) {
            append(&path, &record.created_line(), true)?;
            for e in &record.events {
                append(&path, &LogLine::Ballot(e.clone()), false)?;
            }
        }
        Ok(self.insert(record).status.read().expect("poisoned").as_ref().clone())
    }

    pub fn create(&self, request: CreateSession) -> Result<SessionStatus, ApiError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.admit(SessionRecord::create(id, now_ms(), request)?)
    }

    /// Rebuilds an exported session under its original id. The replayed
    /// status must equal the exported one.
    pub fn import(&self, transcript: Transcript) -> Result<SessionStatus, ApiError> {
        if !valid_id(&transcript.session_id) {
            return Err(ApiError::validation("session_id", "ids use letters, digits, '-' and '_'"));
        }
        let record = SessionRecord::replay(
            transcript.session_id.clone(),
            transcript.created_at_ms,
            transcript.request,
            &transcript.events,
        )?;
        if record.status() != transcript.status {
            return Err(ApiError::validation("status", "replayed events do not reproduce the exported status"));
        }
        self.admit(record)
    }

    pub fn status(&self, id: &str) -> Result<Arc<SessionStatus>, ApiError> {
        Ok(self.handle(id)?.status.read().expect("poisoned").clone())
    }

    pub fn submit(&self, id: &str, sub: Submission) -> Result<SubmitResponse, ApiError> {
        let handle = self.handle(id)?;
        let mut record = handle.record.lock().expect("poisoned");
        let mut next = record.clone();
        let (event, report) = next.submit(sub, now_ms())?;
        if let Some(path) = &handle.log {
            append(path, &LogLine::Ballot(event.clone()), false)?;
        }
        *record = next;
        let status = record.status();
        *handle.status.write().expect("poisoned") = Arc::new(status.clone());
        // No subscribers is not an error.
        let _ = handle.tx.send(Arc::new(StreamMessage {
            event,
            status: status.clone(),
        }));
        Ok(SubmitResponse { report, status })
    }

    /// Ballot events with `sequence_no > since`.
    pub fn events_since(&self, id: &str, since: u64) -> Result<Vec<BallotEvent>, ApiError> {
        let handle = self.handle(id)?;
        let record = handle.record.lock().expect("poisoned");
        Ok(record.events.iter().filter(|e| e.sequence_no > since).cloned().collect())
    }

    pub fn subscribe(&self, id: &str) -> Result<broadcast::Receiver<Arc<StreamMessage>>, ApiError> {
        Ok(self.handle(id)?.tx.subscribe())
    }

    pub fn export(&self, id: &str) -> Result<Transcript, ApiError> {
        Ok(self.handle(id)?.record.lock().expect("poisoned").transcript())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("poisoned").keys().cloned().collect();
        ids.sort();
        ids
    }
}
