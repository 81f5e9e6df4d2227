//! Domain values shared by the rest of the crate. No I/O, no randomness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Token used in manifests and interpretations for an overvote or undervote.
pub const INVALID_TOKEN: &str = "@invalid";

/// Opaque, nonempty candidate identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct CandidateId(String);

impl CandidateId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(invalid("candidate id must be nonempty"));
        }
        if id == INVALID_TOKEN {
            return Err(invalid(format!("{INVALID_TOKEN} is reserved")));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for CandidateId {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        CandidateId::new(s).map_err(serde::de::Error::custom)
    }
}

/// What a ballot shows for one contest: a candidate, or nothing countable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Choice {
    Candidate(CandidateId),
    /// Overvote or undervote.
    Invalid,
}

impl Choice {
    /// Parses a manifest or interpretation token.
    pub fn parse(token: &str) -> Result<Self> {
        let token = token.trim();
        if token == INVALID_TOKEN {
            Ok(Choice::Invalid)
        } else {
            CandidateId::new(token).map(Choice::Candidate)
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Choice::Candidate(c) => c.as_str(),
            Choice::Invalid => INVALID_TOKEN,
        }
    }

    pub fn candidate(&self) -> Option<&CandidateId> {
        match self {
            Choice::Candidate(c) => Some(c),
            Choice::Invalid => None,
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Choice {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Choice::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// One contest on the ballot: its candidates, how many win, and who was
/// reported as winning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestSpec {
    pub contest_id: String,
    pub candidates: Vec<CandidateId>,
    pub winner_count: usize,
    pub reported_winners: Vec<CandidateId>,
    /// Number of cast ballots containing this contest.
    pub n: u64,
}

impl ContestSpec {
    pub fn validate(&self) -> Result<()> {
        let id = &self.contest_id;
        if id.is_empty() {
            return Err(invalid("contest_id must be nonempty"));
        }
        if self.candidates.len() < 2 {
            return Err(invalid(format!("contest {id}: needs at least two candidates")));
        }
        let distinct: BTreeSet<_> = self.candidates.iter().collect();
        if distinct.len() != self.candidates.len() {
            return Err(invalid(format!("contest {id}: duplicate candidate ids")));
        }
        if self.winner_count == 0 || self.winner_count >= self.candidates.len() {
            return Err(invalid(format!(
                "contest {id}: winner_count must satisfy 1 <= W < C (W={}, C={})",
                self.winner_count,
                self.candidates.len()
            )));
        }
        let winners: BTreeSet<_> = self.reported_winners.iter().collect();
        if winners.len() != self.reported_winners.len() || winners.len() != self.winner_count {
            return Err(invalid(format!(
                "contest {id}: expected {} distinct reported winners",
                self.winner_count
            )));
        }
        if let Some(w) = winners.iter().find(|w| !distinct.contains(*w)) {
            return Err(invalid(format!("contest {id}: reported winner {w} is not a candidate")));
        }
        if self.n == 0 {
            return Err(invalid(format!("contest {id}: n must be at least 1")));
        }
        Ok(())
    }

    /// Candidates not reported as winners, in candidate order.
    pub fn reported_losers(&self) -> Vec<CandidateId> {
        self.candidates
            .iter()
            .filter(|c| !self.reported_winners.contains(c))
            .cloned()
            .collect()
    }

    pub fn is_candidate(&self, id: &CandidateId) -> bool {
        self.candidates.contains(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub ballot_id: String,
    /// Contest id to what the ballot shows. Contests not on the ballot are absent.
    pub choices: BTreeMap<String, Choice>,
}

impl Ballot {
    pub fn new(ballot_id: impl Into<String>) -> Self {
        Self {
            ballot_id: ballot_id.into(),
            choices: BTreeMap::new(),
        }
    }

    pub fn with(mut self, contest_id: impl Into<String>, choice: Choice) -> Self {
        self.choices.insert(contest_id.into(), choice);
        self
    }

    pub fn has_contest(&self, contest_id: &str) -> bool {
        self.choices.contains_key(contest_id)
    }
}

/// All cast ballots. Ballot ids are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Ballot>", into = "Vec<Ballot>")]
pub struct Profile {
    ballots: Vec<Ballot>,
    index: BTreeMap<String, usize>,
}

impl Profile {
    pub fn new(ballots: Vec<Ballot>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, b) in ballots.iter().enumerate() {
            if b.ballot_id.is_empty() {
                return Err(invalid(format!("ballot at position {i} has an empty id")));
            }
            if index.insert(b.ballot_id.clone(), i).is_some() {
                return Err(invalid(format!("duplicate ballot id {}", b.ballot_id)));
            }
        }
        Ok(Self { ballots, index })
    }

    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    pub fn len(&self) -> usize {
        self.ballots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ballots.is_empty()
    }

    pub fn get(&self, ballot_id: &str) -> Option<&Ballot> {
        self.index.get(ballot_id).map(|&i| &self.ballots[i])
    }

    /// Count of ballots containing the contest.
    pub fn contest_size(&self, contest_id: &str) -> u64 {
        self.ballots.iter().filter(|b| b.has_contest(contest_id)).count() as u64
    }

    /// Checks every ballot's contests are declared and every declared
    /// contest's `n` matches the ballots carrying it.
    pub fn validate_against(&self, contests: &[ContestSpec]) -> Result<()> {
        let known: BTreeMap<&str, &ContestSpec> =
            contests.iter().map(|c| (c.contest_id.as_str(), c)).collect();
        let mut sizes: BTreeMap<&str, u64> = BTreeMap::new();
        for ballot in &self.ballots {
            for (contest_id, choice) in &ballot.choices {
                let Some(spec) = known.get(contest_id.as_str()) else {
                    return Err(Error::UnknownContest(format!(
                        "{contest_id} (ballot {})",
                        ballot.ballot_id
                    )));
                };
                if let Choice::Candidate(c) = choice {
                    if !spec.is_candidate(c) {
                        return Err(invalid(format!(
                            "ballot {}: {c} is not a candidate in contest {contest_id}",
                            ballot.ballot_id
                        )));
                    }
                }
                *sizes.entry(spec.contest_id.as_str()).or_default() += 1;
            }
        }
        for spec in contests {
            let derived = sizes.get(spec.contest_id.as_str()).copied().unwrap_or(0);
            if derived != spec.n {
                return Err(invalid(format!(
                    "contest {}: declared n={} but {derived} ballots carry it",
                    spec.contest_id, spec.n
                )));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<Ballot>> for Profile {
    type Error = Error;

    fn try_from(ballots: Vec<Ballot>) -> Result<Self> {
        Profile::new(ballots)
    }
}

impl From<Profile> for Vec<Ballot> {
    fn from(p: Profile) -> Self {
        p.ballots
    }
}

/// Where a stopping constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSource {
    Table,
    Formula,
    FormulaUpperBound,
    Simulation,
    Manual,
}

impl fmt::Display for BetaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaSource::Table => "table",
            BetaSource::Formula => "formula",
            BetaSource::FormulaUpperBound => "upper",
            BetaSource::Simulation => "simulation",
            BetaSource::Manual => "manual",
        })
    }
}

/// Parameters of one pairwise test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    pub n: u64,
    pub alpha: f64,
    pub beta: f64,
    pub beta_source: BetaSource,
}

impl AuditParams {
    pub fn new(n: u64, alpha: f64, beta: f64, beta_source: BetaSource) -> Result<Self> {
        check_alpha(alpha)?;
        if n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(invalid(format!("beta must be a positive number, got {beta}")));
        }
        Ok(Self {
            n,
            alpha,
            beta,
            beta_source,
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Running counts for one (winner, loser) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTally {
    pub winner: CandidateId,
    pub loser: CandidateId,
    pub a: u64,
    pub b: u64,
}

impl PairTally {
    pub fn new(winner: CandidateId, loser: CandidateId) -> Self {
        Self {
            winner,
            loser,
            a: 0,
            b: 0,
        }
    }

    pub fn margin(&self) -> i64 {
        self.a as i64 - self.b as i64
    }

    /// Applies one ballot's choice. Returns whether a or b moved.
    pub fn observe(&mut self, choice: &Choice) -> bool {
        match choice.candidate() {
            Some(c) if *c == self.winner => {
                self.a += 1;
                true
            }
            Some(c) if *c == self.loser => {
                self.b += 1;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubauditState {
    Open,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubauditStatus {
    pub tally: PairTally,
    pub params: AuditParams,
    pub state: SubauditState,
}
