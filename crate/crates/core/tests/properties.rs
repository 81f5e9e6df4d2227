use std::collections::BTreeMap;

use clipaudit::beta::{quantile_beta, WalkStatistic};
use clipaudit::engine::{make_plan, stops, AuditSession, BetaChoice, Verdict};
use clipaudit::types::{
    AuditParams, Ballot, BetaSource, CandidateId, Choice, ContestSpec, PairTally, SubauditState,
    SubauditStatus,
};
use proptest::prelude::*;

fn cid(s: &str) -> CandidateId {
    CandidateId::new(s).unwrap()
}

fn contest(id: &str, cands: &[&str], winners: &[&str], n: u64) -> ContestSpec {
    ContestSpec {
        contest_id: id.into(),
        candidates: cands.iter().map(|c| cid(c)).collect(),
        winner_count: winners.len(),
        reported_winners: winners.iter().map(|c| cid(c)).collect(),
        n,
    }
}

const TOKENS: [&str; 4] = ["A", "B", "C", "@invalid"];

fn ballots(votes: &[usize]) -> Vec<Ballot> {
    votes
        .iter()
        .enumerate()
        .map(|(i, &v)| Ballot::new(format!("b{i:03}")).with("race", Choice::parse(TOKENS[v]).unwrap()))
        .collect()
}

proptest! {
    #[test]
    fn quantile_is_permutation_invariant(
        mut values in prop::collection::vec(0.0f64..5.0, 1..60),
        alpha in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let stats: Vec<WalkStatistic> = values.iter().copied().map(WalkStatistic).collect();
        let before = quantile_beta(&stats, alpha);
        // Deterministic shuffle.
        let mut s = seed;
        for i in (1..values.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            values.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<WalkStatistic> = values.iter().copied().map(WalkStatistic).collect();
        prop_assert_eq!(before, quantile_beta(&shuffled, alpha));
    }

    #[test]
    fn stopping_rule_matches_definition(a in 0u64..10_000, b in 0u64..10_000, beta in 0.01f64..5.0) {
        let expected = (a as f64 - b as f64) > beta * ((a + b) as f64).sqrt();
        prop_assert_eq!(stops(a, b, beta), expected);
    }

    #[test]
    fn acceptance_is_monotone_and_replay_is_deterministic(
        votes in prop::collection::vec(0usize..4, 1..80),
        beta in 0.3f64..3.0,
    ) {
        let n = votes.len() as u64;
        let plan = make_plan(&[contest("race", &["A", "B", "C"], &["A"], n)], 0.1, &BetaChoice::Manual { beta }).unwrap();
        let mut first = AuditSession::new(plan.clone());
        let mut second = AuditSession::new(plan.clone());
        let mut accepted_before = [false; 2];
        for ballot in ballots(&votes) {
            if first.is_finished() {
                prop_assert!(first.ingest_ballot(&ballot).is_err());
                break;
            }
            first.ingest_ballot(&ballot).unwrap();
            second.ingest_ballot(&ballot).unwrap();
            for (i, sub) in first.contests()[0].subaudits.iter().enumerate() {
                let now = sub.state == SubauditState::Accepted;
                prop_assert!(now || !accepted_before[i], "subaudit {} reopened", i);
                accepted_before[i] = now;
            }
        }
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(
            serde_json::to_string(&first.snapshot()).unwrap(),
            serde_json::to_string(&second.snapshot()).unwrap()
        );
        prop_assert!(first.contests()[0].drawn <= n);
    }

    #[test]
    fn joint_audit_is_independent_pairwise_audits(
        votes in prop::collection::vec(0usize..4, 1..80),
        beta in 0.3f64..2.5,
    ) {
        let n = votes.len() as u64;
        let choice = BetaChoice::Manual { beta };
        let mut joint = AuditSession::new(make_plan(&[contest("race", &["A", "B", "C"], &["A"], n)], 0.1, &choice).unwrap());
        let params = AuditParams::new(n, 0.1, beta, BetaSource::Manual).unwrap();
        let mut alone: Vec<SubauditStatus> = ["B", "C"]
            .iter()
            .map(|l| SubauditStatus::open(cid("A"), cid(l), params))
            .collect();
        for ballot in ballots(&votes) {
            if joint.is_finished() {
                break;
            }
            joint.ingest_ballot(&ballot).unwrap();
            for sub in &mut alone {
                sub.observe(&ballot.choices["race"]);
            }
            for sub in &joint.contests()[0].subaudits {
                let twin = alone.iter().find(|s| s.tally.loser == sub.tally.loser).unwrap();
                prop_assert_eq!(sub, twin);
            }
        }
        let all = alone.iter().all(|s| s.state == SubauditState::Accepted);
        prop_assert_eq!(joint.verdict() == &Verdict::AllAccepted, all);
    }

    #[test]
    fn core_types_round_trip(a in 0u64..1000, b in 0u64..1000, alpha in 0.001f64..0.999, beta in 0.01f64..10.0) {
        let tally = PairTally { winner: cid("W"), loser: cid("L"), a, b };
        let back: PairTally = serde_json::from_str(&serde_json::to_string(&tally).unwrap()).unwrap();
        prop_assert_eq!(back, tally);
        let params = AuditParams::new(a + 1, alpha, beta, BetaSource::Simulation).unwrap();
        let back: AuditParams = serde_json::from_str(&serde_json::to_string(&params).unwrap()).unwrap();
        prop_assert_eq!(back, params);
        let ballot = Ballot::new(format!("x{a}")).with("c", Choice::Invalid).with("d", Choice::Candidate(cid("Q")));
        let back: Ballot = serde_json::from_str(&serde_json::to_string(&ballot).unwrap()).unwrap();
        prop_assert_eq!(back, ballot);
    }
}

#[test]
fn two_candidate_plan_is_a_single_pair() {
    let plan = make_plan(&[contest("race", &["A", "B"], &["B"], 10)], 0.05, &BetaChoice::Table).unwrap();
    assert_eq!(plan.contests[0].pairs, vec![(cid("B"), cid("A"))]);
    let spec = contest("race", &["A", "B", "C", "D", "E"], &["A", "C"], 10);
    let plan = make_plan(&[spec], 0.05, &BetaChoice::Table).unwrap();
    let pairs: BTreeMap<_, _> = plan.contests[0].pairs.iter().cloned().map(|p| (p, ())).collect();
    assert_eq!(pairs.len(), 6);
}
