//! Seeded ballot draws without replacement, manifest loading, and synthetic
//! profiles.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::types::{Ballot, CandidateId, Choice, ContestSpec, Profile};

/// The draws of one audit.
///
/// Draw `k` picks uniformly from the eligible set at that moment, taken in
/// lexicographic ballot-id order, using stream `k` of the sampler domain. The
/// sequence is therefore fixed by the seed and the eligibility history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawSequence {
    pub seed: u64,
    pub emitted: Vec<String>,
}

impl DrawSequence {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            emitted: Vec::new(),
        }
    }

    /// The ballot draw number `emitted.len()` would pick, without recording it.
    pub fn peek(&self, eligible: &BTreeSet<String>) -> Result<String> {
        if eligible.is_empty() {
            return Err(Error::Exhausted);
        }
        let mut words = rng::words(self.seed, rng::domain::SAMPLER, self.emitted.len() as u64);
        let pick = words.index(eligible.len());
        Ok(eligible.iter().nth(pick).expect("index below len").clone())
    }

    /// Draws and records the next ballot.
    pub fn next_draw(&mut self, eligible: &BTreeSet<String>) -> Result<String> {
        let id = self.peek(eligible)?;
        if self.emitted.contains(&id) {
            return Err(Error::DuplicateDraw(id));
        }
        self.emitted.push(id.clone());
        Ok(id)
    }
}

const MANIFEST_HEADER: [&str; 3] = ["ballot_id", "contest_id", "choice"];

/// Parses a ballot manifest: header `ballot_id,contest_id,choice`, one row
/// per (ballot, contest). `choice` is a candidate id or `@invalid`.
///
/// When `contests` is given, rows naming an undeclared contest or a
/// candidate outside their contest are rejected, and each contest's ballot
/// count must match its declared `n`.
pub fn parse_manifest<R: Read>(input: R, contests: Option<&[ContestSpec]>) -> Result<Profile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.iter().map(str::trim).collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", MANIFEST_HEADER.join(",")),
        });
    }
    let declared: Option<BTreeMap<&str, &ContestSpec>> =
        contests.map(|cs| cs.iter().map(|c| (c.contest_id.as_str(), c)).collect());

    let mut order: Vec<String> = Vec::new();
    let mut ballots: BTreeMap<String, Ballot> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        if rec.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", rec.len())));
        }
        let (ballot_id, contest_id, token) = (rec[0].trim(), rec[1].trim(), rec[2].trim());
        if ballot_id.is_empty() || contest_id.is_empty() {
            return Err(err("empty ballot_id or contest_id".into()));
        }
        let choice = Choice::parse(token).map_err(|e| err(e.to_string()))?;
        if let Some(declared) = &declared {
            let Some(spec) = declared.get(contest_id) else {
                return Err(err(format!("unknown contest {contest_id}")));
            };
            if let Choice::Candidate(c) = &choice {
                if !spec.is_candidate(c) {
                    return Err(err(format!("{c} is not a candidate in contest {contest_id}")));
                }
            }
        }
        let ballot = ballots.entry(ballot_id.to_string()).or_insert_with(|| {
            order.push(ballot_id.to_string());
            Ballot::new(ballot_id)
        });
        if ballot.choices.insert(contest_id.to_string(), choice).is_some() {
            return Err(err(format!("duplicate row for ballot {ballot_id} contest {contest_id}")));
        }
    }
    let profile = Profile::new(
        order
            .into_iter()
            .map(|id| ballots.remove(&id).expect("recorded"))
            .collect(),
    )?;
    if let Some(contests) = contests {
        profile.validate_against(contests)?;
    }
    Ok(profile)
}

pub fn load_manifest(path: impl AsRef<Path>, contests: Option<&[ContestSpec]>) -> Result<Profile> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_manifest(std::io::BufReader::new(file), contests)
}

/// Writes a profile in manifest format.
pub fn manifest_csv(profile: &Profile) -> String {
    let mut out = String::from("ballot_id,contest_id,choice\n");
    for b in profile.ballots() {
        for (contest, choice) in &b.choices {
            out.push_str(&format!("{},{},{}\n", b.ballot_id, contest, choice));
        }
    }
    out
}

fn default_contest() -> String {
    "contest".to_string()
}

/// A single-contest synthetic election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfileSpec {
    pub n: u64,
    /// Share of ballots per candidate; the remainder is invalid.
    #[serde(default)]
    pub fractions: BTreeMap<CandidateId, f64>,
    /// Exact tallies, overriding `fractions`. Must sum to at most `n`; the
    /// remainder is invalid.
    #[serde(default)]
    pub exact_counts: Option<BTreeMap<CandidateId, u64>>,
    #[serde(default = "default_contest")]
    pub contest_id: String,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticProfileSpec {
    /// Per-candidate counts; fractions round to nearest.
    pub fn counts(&self) -> Result<BTreeMap<CandidateId, u64>> {
        let counts = match &self.exact_counts {
            Some(exact) => exact.clone(),
            None => {
                let mut total = 0.0;
                let mut counts = BTreeMap::new();
                for (c, &f) in &self.fractions {
                    if !(0.0..=1.0).contains(&f) {
                        return Err(invalid(format!("fraction for {c} must lie in [0, 1]")));
                    }
                    total += f;
                    counts.insert(c.clone(), (self.n as f64 * f).round() as u64);
                }
                if total > 1.0 + 1e-9 {
                    return Err(invalid(format!("fractions sum to {total} > 1")));
                }
                counts
            }
        };
        let sum: u64 = counts.values().sum();
        if sum > self.n {
            return Err(invalid(format!("counts sum to {sum}, exceeding n={}", self.n)));
        }
        Ok(counts)
    }
}

/// Builds the profile in a seeded random order. Ballot ids are `b` followed
/// by a zero-padded index, so lexicographic order is index order.
pub fn synthesize_profile(spec: &SyntheticProfileSpec, seed: u64) -> Result<Profile> {
    if spec.n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let counts = spec.counts()?;
    let mut choices: Vec<Choice> = Vec::with_capacity(spec.n as usize);
    for (c, &k) in &counts {
        choices.extend(std::iter::repeat_n(Choice::Candidate(c.clone()), k as usize));
    }
    choices.resize(spec.n as usize, Choice::Invalid);
    let mut words = rng::words(seed, rng::domain::PROFILE, 0);
    for i in (1..choices.len()).rev() {
        let j = words.index(i + 1);
        choices.swap(i, j);
    }
    let width = spec.n.to_string().len();
    Profile::new(
        choices
            .into_iter()
            .enumerate()
            .map(|(i, c)| Ballot::new(format!("b{i:0width$}")).with(spec.contest_id.clone(), c))
            .collect(),
    )
}
