//! Session state and its event log.

use std::collections::BTreeMap;

use clipaudit::engine::{make_plan, BetaChoice, IngestReport, Snapshot};
use clipaudit::live::LiveAudit;
use clipaudit::sampler::{parse_manifest, synthesize_profile, SyntheticProfileSpec};
use clipaudit::types::{Choice, ContestSpec};
use clipaudit::Error;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

fn default_beta() -> BetaChoice {
    BetaChoice::Table
}

/// Body of `POST /sessions`. Exactly one of `manifest` (CSV text) and
/// `synthetic` supplies the ballots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub contests: Vec<ContestSpec>,
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta_source: BetaChoice,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticProfileSpec>,
}

/// Body of `POST /sessions/{id}/ballots`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub sequence_no: u64,
    pub ballot_id: String,
    pub interpretations: BTreeMap<String, Choice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallotEvent {
    pub sequence_no: u64,
    pub ballot_id: String,
    pub interpretations: BTreeMap<String, Choice>,
    pub at_ms: u64,
}

/// One line of a session's append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogLine {
    Created {
        session_id: String,
        created_at_ms: u64,
        request: CreateSession,
    },
    Ballot(BallotEvent),
}

/// What clients see of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub seed: u64,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    /// The `sequence_no` the next submission must carry.
    pub next_sequence_no: u64,
    /// Ballot to retrieve next; absent once the audit has finished.
    pub announced: Option<String>,
    pub eligible_remaining: u64,
    pub snapshot: Snapshot,
}

/// Export format: everything needed to rebuild the session, plus the status
/// it should rebuild to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub created_at_ms: u64,
    pub request: CreateSession,
    pub events: Vec<BallotEvent>,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmitResponse {
    pub report: IngestReport,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    pub created_at_ms: u64,
    pub request: CreateSession,
    pub events: Vec<BallotEvent>,
    live: LiveAudit,
}

fn field(field: &str, err: Error) -> ApiError {
    ApiError::from(err).with_field(field)
}

impl SessionRecord {
    pub fn create(session_id: String, created_at_ms: u64, request: CreateSession) -> Result<Self, ApiError> {
        if !(request.alpha > 0.0 && request.alpha < 1.0) {
            return Err(ApiError::validation("alpha", format!("alpha must lie in (0, 1), got {}", request.alpha)));
        }
        if request.contests.is_empty() {
            return Err(ApiError::validation("contests", "at least one contest is required"));
        }
        for c in &request.contests {
            c.validate().map_err(|e| field("contests", e))?;
        }
        let profile = match (&request.manifest, &request.synthetic) {
            (Some(csv), None) => {
                parse_manifest(csv.as_bytes(), Some(&request.contests)).map_err(|e| field("manifest", e))?
            }
            (None, Some(spec)) => synthesize_profile(spec, spec.seed).map_err(|e| field("synthetic", e))?,
            _ => {
                return Err(ApiError::validation(
                    "manifest",
                    "exactly one of manifest and synthetic is required",
                ))
            }
        };
        let plan = make_plan(&request.contests, request.alpha, &request.beta_source).map_err(|e| {
            let name = match e {
                Error::OutOfTable { .. } => "beta_source",
                _ => "contests",
            };
            field(name, e)
        })?;
        let source = if request.manifest.is_some() { "manifest" } else { "synthetic" };
        let live = LiveAudit::new(plan, profile, request.seed).map_err(|e| field(source, e))?;
        Ok(Self {
            session_id,
            created_at_ms,
            request,
            events: Vec::new(),
            live,
        })
    }

    pub fn next_sequence_no(&self) -> u64 {
        self.events.len() as u64 + 1
    }

    /// Validates and applies one submission, returning the event to log.
    pub fn submit(&mut self, sub: Submission, at_ms: u64) -> Result<(BallotEvent, IngestReport), ApiError> {
        let expected = self.next_sequence_no();
        if sub.sequence_no != expected {
            return Err(ApiError::conflict(format!(
                "stale sequence_no {}; the session expects {expected}",
                sub.sequence_no
            )));
        }
        let event = BallotEvent {
            sequence_no: sub.sequence_no,
            ballot_id: sub.ballot_id,
            interpretations: sub.interpretations,
            at_ms,
        };
        let report = self.apply(&event)?;
        Ok((event, report))
    }

    fn apply(&mut self, event: &BallotEvent) -> Result<IngestReport, ApiError> {
        if event.sequence_no != self.next_sequence_no() {
            return Err(ApiError::conflict(format!("event {} out of order", event.sequence_no)));
        }
        let report = self
            .live
            .submit(&event.ballot_id, event.interpretations.clone())
            .map_err(|e| field("ballot_id", e))?;
        self.events.push(event.clone());
        Ok(report)
    }

    /// Rebuilds a session from its creation request and ballot events.
    pub fn replay(
        session_id: String,
        created_at_ms: u64,
        request: CreateSession,
        events: &[BallotEvent],
    ) -> Result<Self, ApiError> {
        let mut record = Self::create(session_id, created_at_ms, request)?;
        for e in events {
            record.apply(e)?;
        }
        Ok(record)
    }

    pub fn status(&self) -> SessionStatus {
        let eligible = if self.live.session().is_finished() {
            0
        } else {
            self.live.eligible().len() as u64
        };
        SessionStatus {
            session_id: self.session_id.clone(),
            seed: self.request.seed,
            created_at_ms: self.created_at_ms,
            updated_at_ms: self.events.last().map_or(self.created_at_ms, |e| e.at_ms),
            next_sequence_no: self.next_sequence_no(),
            announced: self.live.announced().map(str::to_string),
            eligible_remaining: eligible,
            snapshot: self.live.session().snapshot(),
        }
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            session_id: self.session_id.clone(),
            created_at_ms: self.created_at_ms,
            request: self.request.clone(),
            events: self.events.clone(),
            status: self.status(),
        }
    }

    pub fn created_line(&self) -> LogLine {
        LogLine::Created {
            session_id: self.session_id.clone(),
            created_at_ms: self.created_at_ms,
            request: self.request.clone(),
        }
    }
}
