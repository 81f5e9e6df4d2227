//! The sequential audit.
//!
//! A plan holds one pairwise subaudit per (reported winner, reported loser)
//! of every contest. Ballots are fed one at a time; each subaudit counts the
//! votes for its two candidates and accepts once `a - b > beta * sqrt(a + b)`.
//! A contest is accepted when all its subaudits are, and is fully counted
//! when every one of its ballots has been drawn first.
//!
//! Nothing here consumes reported vote shares. The decision depends only on
//! the drawn ballots, `n`, `alpha`, and `beta`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::beta::{beta_formula, beta_formula_upper, beta_lookup, simulate_beta, CalibrationJob};
use crate::error::{invalid, Error, Result};
use crate::types::{
    check_alpha, AuditParams, Ballot, BetaSource, CandidateId, Choice, ContestSpec, PairTally,
    Profile, SubauditState, SubauditStatus,
};

/// How to obtain `beta` for each contest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum BetaChoice {
    Table,
    Formula,
    FormulaUpperBound,
    Simulation {
        trials: u64,
        seed: u64,
        #[serde(default = "one")]
        parallelism: usize,
    },
    Manual {
        beta: f64,
    },
}

fn one() -> usize {
    1
}

impl BetaChoice {
    pub fn source(&self) -> BetaSource {
        match self {
            BetaChoice::Table => BetaSource::Table,
            BetaChoice::Formula => BetaSource::Formula,
            BetaChoice::FormulaUpperBound => BetaSource::FormulaUpperBound,
            BetaChoice::Simulation { .. } => BetaSource::Simulation,
            BetaChoice::Manual { .. } => BetaSource::Manual,
        }
    }

    pub fn resolve(&self, n: u64, alpha: f64) -> Result<AuditParams> {
        let beta = match *self {
            BetaChoice::Table => beta_lookup(n, alpha)?.beta,
            BetaChoice::Formula => beta_formula(n, alpha)?,
            BetaChoice::FormulaUpperBound => beta_formula_upper(n, alpha)?,
            BetaChoice::Simulation {
                trials,
                seed,
                parallelism,
            } => {
                let job = CalibrationJob {
                    n,
                    alphas: vec![alpha],
                    trials,
                    seed,
                    parallelism,
                };
                simulate_beta(&job, None)?[0].beta
            }
            BetaChoice::Manual { beta } => beta,
        };
        AuditParams::new(n, alpha, beta, self.source())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestPlan {
    pub spec: ContestSpec,
    pub params: AuditParams,
    /// `(winner, loser)` for every reported winner and reported loser.
    pub pairs: Vec<(CandidateId, CandidateId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPlan {
    pub alpha: f64,
    pub contests: Vec<ContestPlan>,
}

impl AuditPlan {
    pub fn contest(&self, contest_id: &str) -> Option<&ContestPlan> {
        self.contests.iter().find(|c| c.spec.contest_id == contest_id)
    }

    pub fn subaudit_count(&self) -> usize {
        self.contests.iter().map(|c| c.pairs.len()).sum()
    }
}

/// Builds the W x L pairwise subaudits of every contest. Each contest's `beta`
/// is resolved from that contest's own `n` and the shared `alpha`.
pub fn make_plan(contests: &[ContestSpec], alpha: f64, beta: &BetaChoice) -> Result<AuditPlan> {
    check_alpha(alpha)?;
    if contests.is_empty() {
        return Err(invalid("at least one contest is required"));
    }
    let mut seen = BTreeSet::new();
    let mut plans = Vec::with_capacity(contests.len());
    for spec in contests {
        spec.validate()?;
        if !seen.insert(spec.contest_id.as_str()) {
            return Err(invalid(format!("duplicate contest id {}", spec.contest_id)));
        }
        let params = beta.resolve(spec.n, alpha)?;
        let losers = spec.reported_losers();
        let pairs = spec
            .reported_winners
            .iter()
            .flat_map(|w| losers.iter().map(move |l| (w.clone(), l.clone())))
            .collect();
        plans.push(ContestPlan {
            spec: spec.clone(),
            params,
            pairs,
        });
    }
    Ok(AuditPlan {
        alpha,
        contests: plans,
    })
}

/// `a - b > beta * sqrt(a + b)`, strictly.
pub fn stopping_check(tally: &PairTally, beta: f64) -> bool {
    stops(tally.a, tally.b, beta)
}

#[inline]
pub fn stops(a: u64, b: u64, beta: f64) -> bool {
    a > b && (a - b) as f64 > beta * ((a + b) as f64).sqrt()
}

/// `beta * sqrt(a + b)`, the margin a subaudit must exceed.
pub fn threshold(a: u64, b: u64, beta: f64) -> f64 {
    beta * ((a + b) as f64).sqrt()
}

/// How one ballot bears on one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairVote {
    Winner,
    Loser,
    Neither,
}

impl SubauditStatus {
    pub fn open(winner: CandidateId, loser: CandidateId, params: AuditParams) -> Self {
        Self {
            tally: PairTally::new(winner, loser),
            params,
            state: SubauditState::Open,
        }
    }

    /// Counts one vote and applies the stopping rule. Accepted is absorbing.
    #[inline]
    pub fn observe_vote(&mut self, vote: PairVote) -> SubauditState {
        if self.state == SubauditState::Accepted {
            return self.state;
        }
        match vote {
            PairVote::Winner => self.tally.a += 1,
            PairVote::Loser => self.tally.b += 1,
            PairVote::Neither => return self.state,
        }
        if stops(self.tally.a, self.tally.b, self.params.beta) {
            self.state = SubauditState::Accepted;
        }
        self.state
    }

    pub fn observe(&mut self, choice: &Choice) -> SubauditState {
        let vote = match choice.candidate() {
            Some(c) if *c == self.tally.winner => PairVote::Winner,
            Some(c) if *c == self.tally.loser => PairVote::Loser,
            _ => PairVote::Neither,
        };
        self.observe_vote(vote)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContestState {
    Active,
    Accepted,
    FullyCounted,
}

/// Result of hand-counting every ballot of a contest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullCountOutcome {
    pub tallies: BTreeMap<CandidateId, u64>,
    pub invalid: u64,
    /// Candidates certainly among the top W. Equals the top W when there is no tie.
    pub winners: Vec<CandidateId>,
    /// True when the W-th and (W+1)-th tallies are equal; not adjudicated.
    pub tie: bool,
    /// Candidates sharing the tally at the winner/loser boundary, when tied.
    pub tied: Vec<CandidateId>,
    /// Whether the counted winners are the reported winners. None on a tie.
    pub agrees_with_reported: Option<bool>,
}

impl FullCountOutcome {
    pub fn count<'a>(spec: &ContestSpec, choices: impl IntoIterator<Item = &'a Choice>) -> Self {
        let mut tallies: BTreeMap<CandidateId, u64> =
            spec.candidates.iter().map(|c| (c.clone(), 0)).collect();
        let mut invalid = 0;
        for choice in choices {
            match choice.candidate().and_then(|c| tallies.get_mut(c)) {
                Some(t) => *t += 1,
                None => invalid += 1,
            }
        }
        let mut ranked: Vec<(&CandidateId, u64)> =
            spec.candidates.iter().map(|c| (c, tallies[c])).collect();
        ranked.sort_by_key(|x| std::cmp::Reverse(x.1));
        let w = spec.winner_count;
        let boundary = ranked[w - 1].1;
        let tie = ranked[w].1 == boundary;
        let (winners, tied): (Vec<CandidateId>, Vec<CandidateId>) = if tie {
            (
                ranked.iter().filter(|r| r.1 > boundary).map(|r| r.0.clone()).collect(),
                ranked.iter().filter(|r| r.1 == boundary).map(|r| r.0.clone()).collect(),
            )
        } else {
            (ranked[..w].iter().map(|r| r.0.clone()).collect(), Vec::new())
        };
        let agrees_with_reported = (!tie).then(|| {
            let got: BTreeSet<_> = winners.iter().collect();
            let reported: BTreeSet<_> = spec.reported_winners.iter().collect();
            got == reported
        });
        Self {
            tallies,
            invalid,
            winners,
            tie,
            tied,
            agrees_with_reported,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestAudit {
    pub contest_id: String,
    pub state: ContestState,
    /// Ballots of this contest drawn so far.
    pub drawn: u64,
    pub subaudits: Vec<SubauditStatus>,
    pub outcome: Option<FullCountOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    InProgress,
    AllAccepted,
    /// Every contest finished and at least one needed a full count.
    FullCount {
        outcomes: BTreeMap<String, FullCountOutcome>,
    },
}

/// One examined ballot with the choices read off it for the contests still
/// under audit at the time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawnBallot {
    pub ballot_id: String,
    pub interpretations: BTreeMap<String, Choice>,
}

/// Full state of a live audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SessionRepr")]
pub struct AuditSession {
    plan: AuditPlan,
    drawn: Vec<DrawnBallot>,
    contests: Vec<ContestAudit>,
    verdict: Verdict,
    #[serde(skip_serializing)]
    drawn_ids: HashSet<String>,
}

#[derive(Deserialize)]
struct SessionRepr {
    plan: AuditPlan,
    drawn: Vec<DrawnBallot>,
    contests: Vec<ContestAudit>,
    verdict: Verdict,
}

impl From<SessionRepr> for AuditSession {
    fn from(r: SessionRepr) -> Self {
        let drawn_ids = r.drawn.iter().map(|d| d.ballot_id.clone()).collect();
        Self {
            plan: r.plan,
            drawn: r.drawn,
            contests: r.contests,
            verdict: r.verdict,
            drawn_ids,
        }
    }
}

/// A subaudit, by contest and pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRef {
    pub contest_id: String,
    pub winner: CandidateId,
    pub loser: CandidateId,
}

/// What one ingested ballot changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub newly_accepted: Vec<PairRef>,
    pub contests_closed: Vec<String>,
}

impl AuditSession {
    pub fn new(plan: AuditPlan) -> Self {
        let contests = plan
            .contests
            .iter()
            .map(|c| ContestAudit {
                contest_id: c.spec.contest_id.clone(),
                state: ContestState::Active,
                drawn: 0,
                subaudits: c
                    .pairs
                    .iter()
                    .map(|(w, l)| SubauditStatus::open(w.clone(), l.clone(), c.params))
                    .collect(),
                outcome: None,
            })
            .collect();
        Self {
            plan,
            drawn: Vec::new(),
            contests,
            verdict: Verdict::InProgress,
            drawn_ids: HashSet::new(),
        }
    }

    pub fn plan(&self) -> &AuditPlan {
        &self.plan
    }

    pub fn drawn(&self) -> &[DrawnBallot] {
        &self.drawn
    }

    pub fn contests(&self) -> &[ContestAudit] {
        &self.contests
    }

    pub fn contest(&self, contest_id: &str) -> Option<&ContestAudit> {
        self.contests.iter().find(|c| c.contest_id == contest_id)
    }

    pub fn verdict(&self) -> &Verdict {
        &self.verdict
    }

    pub fn is_finished(&self) -> bool {
        self.verdict != Verdict::InProgress
    }

    pub fn has_drawn(&self, ballot_id: &str) -> bool {
        self.drawn_ids.contains(ballot_id)
    }

    fn contest_index(&self, contest_id: &str) -> Option<usize> {
        self.contests.iter().position(|c| c.contest_id == contest_id)
    }

    /// True if the ballot carries a contest still under audit.
    pub fn is_relevant(&self, ballot: &Ballot) -> bool {
        ballot.choices.keys().any(|id| {
            self.contest(id)
                .is_some_and(|c| c.state == ContestState::Active)
        })
    }

    /// Feeds one drawn ballot. `ballot.choices` lists every contest on the
    /// ballot with its hand interpretation; choices for contests no longer
    /// under audit are ignored. The session is unchanged on error.
    pub fn ingest_ballot(&mut self, ballot: &Ballot) -> Result<IngestReport> {
        if self.drawn_ids.contains(&ballot.ballot_id) {
            return Err(Error::DuplicateDraw(ballot.ballot_id.clone()));
        }
        let mut active = Vec::new();
        for (contest_id, choice) in &ballot.choices {
            let idx = self
                .contest_index(contest_id)
                .ok_or_else(|| Error::UnknownContest(contest_id.clone()))?;
            if let Choice::Candidate(c) = choice {
                if !self.plan.contests[idx].spec.is_candidate(c) {
                    return Err(invalid(format!(
                        "ballot {}: {c} is not a candidate in contest {contest_id}",
                        ballot.ballot_id
                    )));
                }
            }
            if self.contests[idx].state == ContestState::Active {
                active.push((idx, choice));
            }
        }
        if active.is_empty() {
            return Err(Error::NotEligible(ballot.ballot_id.clone()));
        }
        for &(idx, _) in &active {
            let audit = &self.contests[idx];
            if audit.drawn >= self.plan.contests[idx].spec.n {
                return Err(invalid(format!(
                    "contest {} already has all {} ballots drawn",
                    audit.contest_id, audit.drawn
                )));
            }
        }

        let mut report = IngestReport {
            newly_accepted: Vec::new(),
            contests_closed: Vec::new(),
        };
        let interpretations: BTreeMap<String, Choice> = active
            .iter()
            .map(|&(idx, choice)| (self.contests[idx].contest_id.clone(), choice.clone()))
            .collect();
        self.drawn_ids.insert(ballot.ballot_id.clone());
        self.drawn.push(DrawnBallot {
            ballot_id: ballot.ballot_id.clone(),
            interpretations,
        });

        for (idx, choice) in active {
            let n = self.plan.contests[idx].spec.n;
            let audit = &mut self.contests[idx];
            audit.drawn += 1;
            for sub in &mut audit.subaudits {
                let before = sub.state;
                if sub.observe(choice) == SubauditState::Accepted && before == SubauditState::Open {
                    report.newly_accepted.push(PairRef {
                        contest_id: audit.contest_id.clone(),
                        winner: sub.tally.winner.clone(),
                        loser: sub.tally.loser.clone(),
                    });
                }
            }
            if audit.subaudits.iter().all(|s| s.state == SubauditState::Accepted) {
                audit.state = ContestState::Accepted;
                report.contests_closed.push(audit.contest_id.clone());
            } else if audit.drawn == n {
                audit.state = ContestState::FullyCounted;
                report.contests_closed.push(audit.contest_id.clone());
            }
        }
        for contest_id in &report.contests_closed {
            let idx = self.contest_index(contest_id).expect("known contest");
            if self.contests[idx].state == ContestState::FullyCounted {
                let outcome = self.count_drawn(idx);
                self.contests[idx].outcome = Some(outcome);
            }
        }
        self.verdict = self.compute_verdict();
        Ok(report)
    }

    fn count_drawn(&self, idx: usize) -> FullCountOutcome {
        let id = &self.contests[idx].contest_id;
        FullCountOutcome::count(
            &self.plan.contests[idx].spec,
            self.drawn.iter().filter_map(|d| d.interpretations.get(id)),
        )
    }

    fn compute_verdict(&self) -> Verdict {
        if self.contests.iter().any(|c| c.state == ContestState::Active) {
            Verdict::InProgress
        } else if self.contests.iter().all(|c| c.state == ContestState::Accepted) {
            Verdict::AllAccepted
        } else {
            Verdict::FullCount {
                outcomes: self
                    .contests
                    .iter()
                    .filter_map(|c| c.outcome.clone().map(|o| (c.contest_id.clone(), o)))
                    .collect(),
            }
        }
    }

    /// Undrawn ballots carrying at least one contest still under audit.
    pub fn eligible_ballots(&self, profile: &Profile) -> BTreeSet<String> {
        let active: BTreeSet<&str> = self
            .contests
            .iter()
            .filter(|c| c.state == ContestState::Active)
            .map(|c| c.contest_id.as_str())
            .collect();
        profile
            .ballots()
            .iter()
            .filter(|b| !self.drawn_ids.contains(&b.ballot_id))
            .filter(|b| b.choices.keys().any(|k| active.contains(k.as_str())))
            .map(|b| b.ballot_id.clone())
            .collect()
    }

    /// Exact tallies for a contest whose ballots have all been drawn.
    pub fn full_count(&self, profile: &Profile, contest_id: &str) -> Result<FullCountOutcome> {
        let idx = self
            .contest_index(contest_id)
            .ok_or_else(|| Error::UnknownContest(contest_id.to_string()))?;
        let on_profile: Vec<&str> = profile
            .ballots()
            .iter()
            .filter(|b| b.has_contest(contest_id))
            .map(|b| b.ballot_id.as_str())
            .collect();
        let drawn = self.contests[idx].drawn;
        let n = on_profile.len() as u64;
        if drawn < n || on_profile.iter().any(|id| !self.drawn_ids.contains(*id)) {
            return Err(Error::NotExhausted {
                contest_id: contest_id.to_string(),
                drawn,
                n,
            });
        }
        Ok(self.count_drawn(idx))
    }

    pub fn snapshot(&self) -> Snapshot {
        let subaudits = self
            .contests
            .iter()
            .flat_map(|c| {
                c.subaudits.iter().map(move |s| SubauditView {
                    contest_id: c.contest_id.clone(),
                    winner: s.tally.winner.clone(),
                    loser: s.tally.loser.clone(),
                    a: s.tally.a,
                    b: s.tally.b,
                    margin: s.tally.margin(),
                    threshold: round4(threshold(s.tally.a, s.tally.b, s.params.beta)),
                    beta: round4(s.params.beta),
                    state: s.state,
                })
            })
            .collect();
        Snapshot {
            plan: self.plan.clone(),
            draws: self.drawn.len() as u64,
            drawn: self.drawn.clone(),
            subaudits,
            contest_states: self
                .contests
                .iter()
                .map(|c| (c.contest_id.clone(), c.state))
                .collect(),
            verdict: self.verdict.clone(),
        }
    }
}

/// Four decimal places for display values.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Per-subaudit view for displays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubauditView {
    pub contest_id: String,
    pub winner: CandidateId,
    pub loser: CandidateId,
    pub a: u64,
    pub b: u64,
    pub margin: i64,
    /// `beta * sqrt(a + b)` to 4 decimals.
    pub threshold: f64,
    pub beta: f64,
    pub state: SubauditState,
}

/// Canonical JSON document of a session: plan, drawn sequence, per-subaudit
/// progress, contest states, and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub plan: AuditPlan,
    pub draws: u64,
    pub drawn: Vec<DrawnBallot>,
    pub subaudits: Vec<SubauditView>,
    pub contest_states: BTreeMap<String, ContestState>,
    pub verdict: Verdict,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cid(s: &str) -> CandidateId {
        CandidateId::new(s).unwrap()
    }

    fn spec(id: &str, cands: &[&str], winners: &[&str], n: u64) -> ContestSpec {
        ContestSpec {
            contest_id: id.into(),
            candidates: cands.iter().map(|c| cid(c)).collect(),
            winner_count: winners.len(),
            reported_winners: winners.iter().map(|c| cid(c)).collect(),
            n,
        }
    }

    fn vote(id: &str, contest: &str, c: &str) -> Ballot {
        Ballot::new(id).with(contest, Choice::parse(c).unwrap())
    }

    fn manual(beta: f64) -> BetaChoice {
        BetaChoice::Manual { beta }
    }

    #[test]
    fn stopping_rule_is_strict() {
        let t = |a, b| PairTally { winner: cid("A"), loser: cid("B"), a, b };
        assert!(stopping_check(&t(100, 50), 2.77));
        assert!(!stopping_check(&t(5, 5), 0.1));
        assert!(stopping_check(&t(10, 0), 3.0));
        assert!(!stopping_check(&t(9, 0), 3.0));
        assert!(!stopping_check(&t(0, 0), 1.0));
        assert!(!stopping_check(&t(0, 10), 1.0));
    }

    #[test]
    fn plan_sizes() {
        let one = make_plan(&[spec("c", &["A", "B", "C"], &["A"], 10)], 0.05, &BetaChoice::Table).unwrap();
        assert_eq!(one.contests[0].pairs, vec![(cid("A"), cid("B")), (cid("A"), cid("C"))]);
        let two = make_plan(&[spec("c", &["A", "B", "C", "D"], &["A", "B"], 10)], 0.05, &BetaChoice::Table)
            .unwrap();
        assert_eq!(two.subaudit_count(), 4);
        let multi = make_plan(
            &[spec("x", &["A", "B"], &["A"], 100), spec("y", &["C", "D"], &["D"], 5000)],
            0.05,
            &BetaChoice::Table,
        )
        .unwrap();
        assert_eq!(multi.subaudit_count(), 2);
        assert_eq!(multi.contests[0].params.beta, 2.236);
        assert_eq!(multi.contests[1].params.beta, 2.770);
        assert!(make_plan(&[spec("x", &["A", "B"], &["A"], 1), spec("x", &["A", "B"], &["A"], 1)], 0.05, &BetaChoice::Table).is_err());
        assert!(make_plan(&[spec("x", &["A", "B"], &["A"], 10_000_000)], 0.05, &BetaChoice::Table).is_err());
        assert!(make_plan(&[], 0.05, &BetaChoice::Table).is_err());
    }

    #[test]
    fn crossing_the_threshold_accepts() {
        let plan = make_plan(&[spec("c", &["A", "B"], &["A"], 100)], 0.05, &manual(3.0)).unwrap();
        let mut s = AuditSession::new(plan);
        for i in 0..9 {
            s.ingest_ballot(&vote(&format!("b{i}"), "c", "A")).unwrap();
        }
        assert_eq!(s.contests()[0].subaudits[0].state, SubauditState::Open);
        let report = s.ingest_ballot(&vote("b9", "c", "A")).unwrap();
        assert_eq!(report.contests_closed, vec!["c".to_string()]);
        assert_eq!(s.verdict(), &Verdict::AllAccepted);
        assert_eq!(s.contests()[0].subaudits[0].tally.a, 10);
    }

    #[test]
    fn irrelevant_votes_only_advance_draws() {
        let plan = make_plan(&[spec("c", &["A", "B", "C"], &["A"], 10)], 0.05, &manual(3.0)).unwrap();
        let mut s = AuditSession::new(plan);
        s.ingest_ballot(&vote("1", "c", "C")).unwrap();
        s.ingest_ballot(&vote("2", "c", "@invalid")).unwrap();
        let ab = &s.contests()[0].subaudits[0];
        assert_eq!((ab.tally.a, ab.tally.b), (0, 0));
        let ac = &s.contests()[0].subaudits[1];
        assert_eq!((ac.tally.a, ac.tally.b), (0, 1));
        assert_eq!(s.contests()[0].drawn, 2);
        assert_eq!(s.snapshot().draws, 2);
    }

    #[test]
    fn ingest_rejections_leave_state_unchanged() {
        let plan = make_plan(
            &[spec("x", &["A", "B"], &["A"], 10), spec("y", &["C", "D"], &["C"], 10)],
            0.05,
            &manual(0.5),
        )
        .unwrap();
        let mut s = AuditSession::new(plan);
        s.ingest_ballot(&vote("1", "x", "A")).unwrap();
        assert_eq!(s.contest("x").unwrap().state, ContestState::Accepted);
        let before = s.clone();
        assert_eq!(s.ingest_ballot(&vote("1", "y", "C")), Err(Error::DuplicateDraw("1".into())));
        assert_eq!(s.ingest_ballot(&vote("2", "x", "A")), Err(Error::NotEligible("2".into())));
        assert!(matches!(s.ingest_ballot(&vote("3", "z", "A")), Err(Error::UnknownContest(_))));
        assert!(s.ingest_ballot(&vote("4", "y", "A")).is_err());
        assert_eq!(s, before);
        // A ballot carrying a closed contest and an active one only moves the active one.
        let both = Ballot::new("5").with("x", Choice::parse("B").unwrap()).with("y", Choice::parse("C").unwrap());
        s.ingest_ballot(&both).unwrap();
        assert_eq!(s.contest("x").unwrap().subaudits[0].tally.b, 0);
        assert_eq!(s.drawn()[1].interpretations.len(), 1);
        assert_eq!(s.verdict(), &Verdict::AllAccepted);
    }

    fn run_full(votes: &[&str], winners: &[&str]) -> (AuditSession, Profile) {
        let n = votes.len() as u64;
        let plan = make_plan(&[spec("c", &["A", "B"], winners, n)], 0.05, &manual(100.0)).unwrap();
        let ballots: Vec<Ballot> =
            votes.iter().enumerate().map(|(i, v)| vote(&format!("b{i}"), "c", v)).collect();
        let profile = Profile::new(ballots.clone()).unwrap();
        let mut s = AuditSession::new(plan);
        for (i, b) in ballots.iter().enumerate() {
            if i + 1 < ballots.len() {
                assert!(matches!(s.full_count(&profile, "c"), Err(Error::NotExhausted { .. })));
            }
            s.ingest_ballot(b).unwrap();
        }
        (s, profile)
    }

    #[test]
    fn full_count_outcomes() {
        let (s, p) = run_full(&["A", "A", "A", "A", "A", "A", "B", "B", "B", "B"], &["A"]);
        let o = s.full_count(&p, "c").unwrap();
        assert_eq!((o.winners.clone(), o.tie, o.agrees_with_reported), (vec![cid("A")], false, Some(true)));
        assert!(matches!(s.verdict(), Verdict::FullCount { outcomes } if outcomes["c"] == o));

        let (s, p) = run_full(&["A", "B", "A", "B", "A", "B", "A", "B", "A", "B"], &["A"]);
        let o = s.full_count(&p, "c").unwrap();
        assert!(o.tie);
        assert!(o.winners.is_empty());
        assert_eq!(o.agrees_with_reported, None);
        assert_eq!(o.tied.len(), 2);

        let (s, p) = run_full(&["A", "A", "A", "A", "B", "B", "B", "B", "B", "B"], &["A"]);
        let o = s.full_count(&p, "c").unwrap();
        assert_eq!((o.winners.clone(), o.agrees_with_reported), (vec![cid("B")], Some(false)));
        assert_eq!(o.tallies[&cid("B")], 6);
    }

    #[test]
    fn eligibility_shrinks_when_a_contest_closes() {
        let plan = make_plan(
            &[spec("x", &["A", "B"], &["A"], 3), spec("y", &["C", "D"], &["C"], 3)],
            0.05,
            &manual(0.5),
        )
        .unwrap();
        let profile = Profile::new(vec![
            vote("1", "x", "A"),
            vote("2", "x", "A"),
            Ballot::new("3").with("x", Choice::parse("B").unwrap()).with("y", Choice::parse("C").unwrap()),
            vote("4", "y", "D"),
            vote("5", "y", "C"),
        ])
        .unwrap();
        let mut s = AuditSession::new(plan);
        assert_eq!(s.eligible_ballots(&profile).len(), 5);
        s.ingest_ballot(profile.get("1").unwrap()).unwrap();
        assert_eq!(s.contest("x").unwrap().state, ContestState::Accepted);
        let eligible: Vec<String> = s.eligible_ballots(&profile).into_iter().collect();
        assert_eq!(eligible, vec!["3", "4", "5"]);
        s.ingest_ballot(profile.get("5").unwrap()).unwrap();
        assert!(s.eligible_ballots(&profile).is_empty());
    }

    #[test]
    fn session_serde_round_trip() {
        let plan = make_plan(&[spec("c", &["A", "B", "C"], &["A"], 10)], 0.1, &BetaChoice::Formula).unwrap();
        let mut s = AuditSession::new(plan);
        s.ingest_ballot(&vote("1", "c", "A")).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: AuditSession = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(back.has_drawn("1"));
    }

    #[test]
    fn beta_choice_serde() {
        let c: BetaChoice = serde_json::from_str(r#"{"source":"manual","beta":2.5}"#).unwrap();
        assert_eq!(c, manual(2.5));
        let c: BetaChoice = serde_json::from_str(r#"{"source":"simulation","trials":10,"seed":1}"#).unwrap();
        assert_eq!(c, BetaChoice::Simulation { trials: 10, seed: 1, parallelism: 1 });
        assert_eq!(BetaChoice::FormulaUpperBound.source(), BetaSource::FormulaUpperBound);
    }
}
