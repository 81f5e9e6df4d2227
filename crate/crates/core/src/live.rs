//! An audit in progress against a known ballot manifest: the sampler
//! announces each ballot, and only the announced ballot can be recorded.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{AuditPlan, AuditSession, ContestState, IngestReport};
use crate::error::{invalid, Error, Result};
use crate::sampler::DrawSequence;
use crate::types::{Ballot, Choice, Profile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveAudit {
    profile: Profile,
    session: AuditSession,
    draws: DrawSequence,
    announced: Option<String>,
}

impl LiveAudit {
    pub fn new(plan: AuditPlan, profile: Profile, seed: u64) -> Result<Self> {
        let specs: Vec<_> = plan.contests.iter().map(|c| c.spec.clone()).collect();
        profile.validate_against(&specs)?;
        let mut live = Self {
            profile,
            session: AuditSession::new(plan),
            draws: DrawSequence::new(seed),
            announced: None,
        };
        live.announce()?;
        Ok(live)
    }

    fn announce(&mut self) -> Result<()> {
        self.announced = if self.session.is_finished() {
            None
        } else {
            Some(self.draws.peek(&self.eligible())?)
        };
        Ok(())
    }

    pub fn eligible(&self) -> BTreeSet<String> {
        self.session.eligible_ballots(&self.profile)
    }

    /// The ballot to retrieve next, or `None` once the audit has finished.
    pub fn announced(&self) -> Option<&str> {
        self.announced.as_deref()
    }

    pub fn session(&self) -> &AuditSession {
        &self.session
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn draws(&self) -> &DrawSequence {
        &self.draws
    }

    /// Records the hand interpretation of the announced ballot. Every
    /// contest on the ballot that is still under audit needs an
    /// interpretation; closed contests may be included and are ignored.
    /// Nothing changes on error.
    pub fn submit(
        &mut self,
        ballot_id: &str,
        interpretations: BTreeMap<String, Choice>,
    ) -> Result<IngestReport> {
        if self.announced.as_deref() != Some(ballot_id) {
            return Err(Error::NotAnnounced {
                expected: self.announced.clone(),
                got: ballot_id.to_string(),
            });
        }
        let listed = self.profile.get(ballot_id).expect("announced ballots are on the manifest");
        if let Some(extra) = interpretations.keys().find(|k| !listed.choices.contains_key(*k)) {
            return Err(invalid(format!("ballot {ballot_id} does not carry contest {extra}")));
        }
        let missing = self.contests_to_interpret(ballot_id);
        let missing: Vec<&str> = missing
            .iter()
            .map(String::as_str)
            .filter(|c| !interpretations.contains_key(*c))
            .collect();
        if !missing.is_empty() {
            return Err(invalid(format!(
                "ballot {ballot_id} needs interpretations for [{}]",
                missing.join(", ")
            )));
        }
        let ballot = Ballot {
            ballot_id: ballot_id.to_string(),
            choices: interpretations,
        };
        let mut next = self.session.clone();
        let report = next.ingest_ballot(&ballot)?;
        let drawn = self.draws.next_draw(&self.eligible())?;
        debug_assert_eq!(drawn, ballot_id);
        self.session = next;
        self.announce()?;
        Ok(report)
    }

    /// Contests on `ballot_id` still under audit, which a submission must
    /// interpret.
    pub fn contests_to_interpret(&self, ballot_id: &str) -> Vec<String> {
        self.profile.get(ballot_id).map_or_else(Vec::new, |b| {
            b.choices
                .keys()
                .filter(|c| self.session.contest(c).is_some_and(|a| a.state == ContestState::Active))
                .cloned()
                .collect()
        })
    }

    /// Submits the manifest's own choices for the announced ballot.
    pub fn submit_recorded(&mut self) -> Result<Option<IngestReport>> {
        let Some(id) = self.announced.clone() else {
            return Ok(None);
        };
        let choices = self.profile.get(&id).expect("on manifest").choices.clone();
        self.submit(&id, choices).map(Some)
    }
}
