use std::sync::atomic::{AtomicU64, Ordering};

use rand_core::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quantile_sorted, BetaRow, TiedWalkSpec, WalkStatistic};
use crate::error::{Error, Result};
use crate::rng::{self, WordStream, GENERATOR_ID};
use crate::types::check_alpha;

const SCREEN_SLACK: f64 = 1.0 - 1e-9;

/// Trials handed to a worker at a time.
const CHUNK: u64 = 512;

/// Monte Carlo calibration of `beta` for one `n` and several alphas.
///
/// The result depends only on `(n, alphas, trials, seed)`; `parallelism`
/// changes wall-clock time and nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationJob {
    pub n: u64,
    pub alphas: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub parallelism: usize,
}

impl CalibrationJob {
    pub fn validate(&self) -> Result<()> {
        TiedWalkSpec::new(self.n)?;
        if self.alphas.is_empty() {
            return Err(Error::Invalid("at least one alpha is required".into()));
        }
        for &a in &self.alphas {
            check_alpha(a)?;
        }
        if self.trials == 0 {
            return Err(Error::Invalid("trials must be at least 1".into()));
        }
        if self.trials > usize::MAX as u64 {
            return Err(Error::Invalid("too many trials".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Invalid("parallelism must be at least 1".into()));
        }
        Ok(())
    }
}

/// Receives `(trials_done, trials_total)` roughly every `stride` trials and
/// once at completion. May be called from any worker thread.
pub struct ProgressObserver<'a> {
    pub stride: u64,
    pub callback: &'a (dyn Fn(u64, u64) + Sync),
}

/// One tied-walk statistic drawn with the remaining-counts method: at each
/// step the next ballot is +1 with probability `up_left / remaining`. No
/// buffer of length `n` is kept.
///
/// The running maximum of `S_t / sqrt(t)` is tracked as an exact integer
/// argmax `(S, t)` (comparing `S^2 t' > S'^2 t`) and converted to a float
/// once. Only positive `S_t` is considered: every tied walk ends at
/// `S_n >= 0`, so the maximum is never negative.
pub fn generate_tied_walk_statistic<R: RngCore>(
    spec: TiedWalkSpec,
    words: &mut WordStream<R>,
) -> WalkStatistic {
    let n = spec.n as u32;
    let mut up_left = spec.up_steps() as u32;
    let mut sum: i64 = 0;
    let mut best_sum: u64 = 0;
    let mut best_t: u64 = 1;
    // Squared best ratio, shaded down so rounding never hides a new maximum.
    let mut screen = 0.0f64;
    for t in 1..=n {
        if up_left == 0 {
            // Only down-steps remain.
            break;
        }
        // Branch-free step: the direction is a coin flip the predictor cannot learn.
        let up = u32::from(words.below(n - t + 1) < up_left);
        up_left -= up;
        sum += 2 * i64::from(up) - 1;
        // The float test only screens; the integer comparison decides.
        if sum > 0 && (sum * sum) as f64 > screen * f64::from(t) {
            let s = sum as u64;
            if u128::from(s * s) * u128::from(best_t)
                > u128::from(best_sum * best_sum) * u128::from(t)
            {
                best_sum = s;
                best_t = u64::from(t);
                screen = (best_sum * best_sum) as f64 / best_t as f64 * SCREEN_SLACK;
            }
        }
    }
    WalkStatistic(best_sum as f64 / (best_t as f64).sqrt())
}

/// The statistic of every trial, in trial order.
pub fn simulate_statistics(
    n: u64,
    trials: u64,
    seed: u64,
    parallelism: usize,
    observer: Option<&ProgressObserver<'_>>,
) -> Result<Vec<f64>> {
    let spec = TiedWalkSpec::new(n)?;
    if parallelism == 0 {
        return Err(Error::Invalid("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let done = AtomicU64::new(0);
    let chunks = trials.div_ceil(CHUNK);

    let per_chunk: Vec<Vec<f64>> = pool.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(trials);
                let out: Vec<f64> = (start..end)
                    .map(|i| {
                        let mut words = rng::words(seed, rng::domain::BETA, i);
                        generate_tied_walk_statistic(spec, &mut words).0
                    })
                    .collect();
                if let Some(obs) = observer {
                    let len = end - start;
                    let now = done.fetch_add(len, Ordering::Relaxed) + len;
                    let stride = obs.stride.max(1);
                    if now / stride != (now - len) / stride || now == trials {
                        (obs.callback)(now, trials);
                    }
                }
                out
            })
            .collect()
    });
    Ok(per_chunk.into_iter().flatten().collect())
}

/// Runs the job and reports one row per alpha, in the job's alpha order.
pub fn simulate_beta(
    job: &CalibrationJob,
    observer: Option<&ProgressObserver<'_>>,
) -> Result<Vec<BetaRow>> {
    job.validate()?;
    let mut stats = simulate_statistics(job.n, job.trials, job.seed, job.parallelism, observer)?;
    stats.sort_by(f64::total_cmp);
    job.alphas
        .iter()
        .map(|&alpha| {
            Ok(BetaRow {
                n: job.n,
                alpha,
                beta: quantile_sorted(&stats, alpha)?,
                trials: job.trials,
                seed: Some(job.seed),
                generator: GENERATOR_ID.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::walk_statistic;
    use std::sync::Mutex;

    /// Replays a generator run while recording its steps.
    fn recorded_walk(n: u64, seed: u64, index: u64) -> Vec<i8> {
        let spec = TiedWalkSpec::new(n).unwrap();
        let mut words = rng::words(seed, rng::domain::BETA, index);
        let mut up_left = spec.up_steps() as u32;
        let mut steps = Vec::new();
        for t in 1..=n as u32 {
            let remaining = n as u32 - t + 1;
            if up_left == 0 {
                steps.push(-1);
                continue;
            }
            if words.below(remaining) < up_left {
                up_left -= 1;
                steps.push(1);
            } else {
                steps.push(-1);
            }
        }
        steps
    }

    #[test]
    fn streaming_statistic_matches_definition() {
        for n in [1, 2, 3, 7, 20, 101, 1000] {
            for i in 0..50 {
                let steps = recorded_walk(n, 9, i);
                assert_eq!(steps.iter().map(|&s| i64::from(s)).sum::<i64>(), (n % 2) as i64);
                let direct = walk_statistic(&steps).0.max(0.0);
                let mut words = rng::words(9, rng::domain::BETA, i);
                let streamed = generate_tied_walk_statistic(TiedWalkSpec::new(n).unwrap(), &mut words).0;
                assert!((direct - streamed).abs() < 1e-12, "n={n} i={i}: {direct} vs {streamed}");
            }
        }
    }

    #[test]
    fn n_one_walk_is_a_single_up_step() {
        let mut words = rng::words(0, rng::domain::BETA, 0);
        assert_eq!(generate_tied_walk_statistic(TiedWalkSpec::new(1).unwrap(), &mut words).0, 1.0);
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let a = simulate_statistics(50, 3000, 11, 1, None).unwrap();
        let b = simulate_statistics(50, 3000, 11, 3, None).unwrap();
        assert_eq!(a.len(), 3000);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn progress_reaches_total() {
        let seen = Mutex::new(Vec::new());
        let cb = |done: u64, total: u64| seen.lock().unwrap().push((done, total));
        let obs = ProgressObserver { stride: 1000, callback: &cb };
        simulate_statistics(10, 5000, 1, 2, Some(&obs)).unwrap();
        let seen = seen.into_inner().unwrap();
        assert!(seen.contains(&(5000, 5000)));
        assert!(seen.len() >= 5);
    }

    #[test]
    fn job_validation() {
        let job = CalibrationJob { n: 10, alphas: vec![0.05], trials: 100, seed: 0, parallelism: 1 };
        assert!(job.validate().is_ok());
        assert!(CalibrationJob { alphas: vec![], ..job.clone() }.validate().is_err());
        assert!(CalibrationJob { trials: 0, ..job.clone() }.validate().is_err());
        assert!(CalibrationJob { parallelism: 0, ..job.clone() }.validate().is_err());
        assert!(CalibrationJob { alphas: vec![1.2], ..job.clone() }.validate().is_err());
        assert!(matches!(
            simulate_beta(&CalibrationJob { trials: 1, alphas: vec![0.5], ..job }, None),
            Err(Error::CalibrationInfeasible { .. })
        ));
    }
}
