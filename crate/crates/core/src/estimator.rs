//! Expected sample sizes, closed-form and simulated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::PairVote;
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::types::{check_alpha, AuditParams, BetaSource, CandidateId, SubauditState, SubauditStatus};

/// A closed-form sample size before and after rounding up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeEstimate {
    pub expected: f64,
    pub ceiled: u64,
}

impl SampleSizeEstimate {
    fn from_real(expected: f64) -> Self {
        Self {
            expected,
            ceiled: expected.ceil() as u64,
        }
    }
}

fn check_margin(m: f64) -> Result<()> {
    if m == 0.0 {
        Err(Error::InfiniteExpectation { margin: m })
    } else if m > 0.0 && m <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("margin must lie in (0, 1], got {m}")))
    }
}

/// `beta^2 / m^2`: where `S_t ~ m t` first exceeds `beta sqrt(t)`.
pub fn expected_sample_size_clip(beta: f64, margin: f64) -> Result<SampleSizeEstimate> {
    check_margin(margin)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    Ok(SampleSizeEstimate::from_real(beta * beta / (margin * margin)))
}

/// Bravo's approximate sample size `2 ln(1/alpha) / m^2`.
pub fn expected_sample_size_bravo(alpha: f64, margin: f64) -> Result<SampleSizeEstimate> {
    check_alpha(alpha)?;
    check_margin(margin)?;
    Ok(SampleSizeEstimate::from_real(
        2.0 * (1.0 / alpha).ln() / (margin * margin),
    ))
}

/// The `beta` below which the ClipAudit estimate is smaller than Bravo's:
/// `sqrt(2 ln(1/alpha))`.
pub fn bravo_crossover_beta(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((2.0 * (1.0 / alpha).ln()).sqrt())
}

/// A simulated two-candidate election with true margin `margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: u64,
    /// True fraction for A minus fraction for B; 0 is an exact tie.
    pub margin: f64,
    pub alpha: f64,
    pub beta: f64,
    pub trials: u64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        AuditParams::new(self.n, self.alpha, self.beta, BetaSource::Manual)?;
        if !(0.0..=1.0).contains(&self.margin) {
            return Err(invalid(format!("margin must lie in [0, 1], got {}", self.margin)));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.n > u64::from(u32::MAX) {
            return Err(invalid("n exceeds u32::MAX"));
        }
        Ok(())
    }

    /// Ballots for the winner: `ceil(n (1 + m) / 2)`; the rest go to the loser.
    pub fn winner_votes(&self) -> u64 {
        ((self.n as f64 * (1.0 + self.margin) / 2.0).ceil() as u64).min(self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub final_sample_size: u64,
    /// True if the audit accepted before exhausting the ballots.
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsnQuantile {
    pub p: f64,
    pub sample_size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsnReport {
    pub scenario: ScenarioSpec,
    pub mean: f64,
    pub stddev: f64,
    /// Final sample size at 10%, 25%, 50%, 75%, 90%, 99%.
    pub quantiles: Vec<AsnQuantile>,
    pub accepted_fraction: f64,
    pub full_count_fraction: f64,
    #[serde(skip)]
    pub trials: Vec<TrialOutcome>,
}

impl AsnReport {
    /// `trial,final_sample_size,stopped` per trial.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("trial,final_sample_size,stopped\n");
        for t in &self.trials {
            out.push_str(&format!("{},{},{}\n", t.trial, t.final_sample_size, t.stopped));
        }
        out
    }
}

const REPORTED_QUANTILES: [f64; 6] = [0.10, 0.25, 0.50, 0.75, 0.90, 0.99];

/// One audit of a shuffled exact-count profile through a pairwise subaudit.
/// Drawing ballot `t` as a winner vote with probability
/// `winner_left / remaining` is sampling without replacement from the profile.
pub fn run_trial(scenario: &ScenarioSpec, trial: u64) -> TrialOutcome {
    let n = scenario.n as u32;
    let mut winner_left = scenario.winner_votes() as u32;
    let params = AuditParams {
        n: scenario.n,
        alpha: scenario.alpha,
        beta: scenario.beta,
        beta_source: BetaSource::Manual,
    };
    let mut sub = SubauditStatus::open(
        CandidateId::new("A").expect("valid"),
        CandidateId::new("B").expect("valid"),
        params,
    );
    let mut words = rng::words(scenario.seed, rng::domain::ASN, trial);
    for t in 1..=n {
        let remaining = n - t + 1;
        let vote = if winner_left > 0 && words.below(remaining) < winner_left {
            winner_left -= 1;
            PairVote::Winner
        } else {
            PairVote::Loser
        };
        if sub.observe_vote(vote) == SubauditState::Accepted {
            return TrialOutcome {
                trial,
                final_sample_size: u64::from(t),
                stopped: true,
            };
        }
    }
    TrialOutcome {
        trial,
        final_sample_size: scenario.n,
        stopped: false,
    }
}

/// Average sample number over `trials` seeded audits.
pub fn measure_asn(scenario: &ScenarioSpec, parallelism: usize) -> Result<AsnReport> {
    scenario.validate()?;
    if parallelism == 0 {
        return Err(invalid("parallelism must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let trials: Vec<TrialOutcome> = pool.install(|| {
        (0..scenario.trials)
            .into_par_iter()
            .map(|i| run_trial(scenario, i))
            .collect()
    });

    let count = trials.len() as f64;
    let mean = trials.iter().map(|t| t.final_sample_size as f64).sum::<f64>() / count;
    let var = if trials.len() > 1 {
        trials
            .iter()
            .map(|t| (t.final_sample_size as f64 - mean).powi(2))
            .sum::<f64>()
            / (count - 1.0)
    } else {
        0.0
    };
    let mut sizes: Vec<u64> = trials.iter().map(|t| t.final_sample_size).collect();
    sizes.sort_unstable();
    let quantiles = REPORTED_QUANTILES
        .iter()
        .map(|&p| {
            let k = ((p * count).ceil() as usize).clamp(1, sizes.len());
            AsnQuantile { p, sample_size: sizes[k - 1] }
        })
        .collect();
    let accepted = trials.iter().filter(|t| t.stopped).count() as f64;
    Ok(AsnReport {
        scenario: scenario.clone(),
        mean,
        stddev: var.sqrt(),
        quantiles,
        accepted_fraction: accepted / count,
        full_count_fraction: 1.0 - accepted / count,
        trials,
    })
}
