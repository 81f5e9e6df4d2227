//! The stopping constant `beta(n, alpha)`.
//!
//! For a tied contest of `n` ballots, drawing every ballot in random order
//! traces a walk `S_t` of +1/-1 steps that ends at 0 (or +1 when `n` is odd).
//! Each walk has the statistic `max_t S_t / sqrt(t)`; `beta` is the
//! `(1 - alpha)` quantile of that statistic, so a tied race crosses
//! `S_t > beta * sqrt(t)` with probability at most `alpha`.

mod exhaustive;
mod simulate;
mod table;

pub use exhaustive::{enumerate_statistics, exhaustive_beta, MAX_EXHAUSTIVE_N};
pub use simulate::{
    generate_tied_walk_statistic, simulate_beta, simulate_statistics, CalibrationJob,
    ProgressObserver,
};
pub use table::{
    beta_lookup, fit_report, BetaRow, BetaTable, FitReport, LookupResult, REFERENCE_ALPHAS,
    REFERENCE_BETAS, REFERENCE_NS, REFERENCE_TRIALS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::types::check_alpha;

/// A tied walk of length `n`: `ceil(n/2)` up-steps and `floor(n/2)` down-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiedWalkSpec {
    pub n: u64,
}

impl TiedWalkSpec {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("walk length must be at least 1".into()));
        }
        if n > u64::from(u32::MAX) {
            return Err(Error::Invalid(format!("walk length {n} exceeds u32::MAX")));
        }
        Ok(Self { n })
    }

    /// Final sum of the walk: 0 for even `n`, +1 for odd.
    pub fn sum_target(&self) -> i64 {
        (self.n % 2) as i64
    }

    pub fn up_steps(&self) -> u64 {
        self.n.div_ceil(2)
    }
}

/// `max_{1<=t<=n} S_t / sqrt(t)` for one walk.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WalkStatistic(pub f64);

/// The statistic of an explicit walk, straight from the definition.
///
/// Steps must be +1 or -1. Returns negative infinity for an empty walk.
pub fn walk_statistic(steps: &[i8]) -> WalkStatistic {
    let mut sum = 0i64;
    let mut best = f64::NEG_INFINITY;
    for (i, &step) in steps.iter().enumerate() {
        sum += i64::from(step);
        let ratio = sum as f64 / ((i + 1) as f64).sqrt();
        if ratio > best {
            best = ratio;
        }
    }
    WalkStatistic(best)
}

/// `k = floor((1 - alpha) * trials)`.
///
/// A relative slack of 1e-9 absorbs binary rounding of decimal alphas, so
/// that `(1 - 0.9) * 10` counts as 1 rather than 0.9999999999999998.
pub fn quantile_rank(trials: u64, alpha: f64) -> u64 {
    let x = (1.0 - alpha) * trials as f64;
    (x + 1e-9 * x.max(1.0)).floor() as u64
}

/// The k-th smallest statistic, `k = floor((1 - alpha) * T)`, counting
/// duplicates and without interpolation.
pub fn quantile_beta(statistics: &[WalkStatistic], alpha: f64) -> Result<f64> {
    let mut values: Vec<f64> = statistics.iter().map(|s| s.0).collect();
    values.sort_by(f64::total_cmp);
    quantile_sorted(&values, alpha)
}

/// [`quantile_beta`] over values already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if sorted.is_empty() {
        return Err(Error::Invalid("no statistics to take a quantile of".into()));
    }
    let trials = sorted.len() as u64;
    let k = quantile_rank(trials, alpha);
    if k == 0 {
        return Err(Error::CalibrationInfeasible { alpha, trials });
    }
    Ok(sorted[(k - 1) as usize])
}

const FORMULA_LOG_COEF: f64 = 0.075;
const FORMULA_ISF_COEF: f64 = 0.700;
const FORMULA_INTERCEPT: f64 = 0.860;
const FORMULA_UPPER_INTERCEPT: f64 = 1.000;

fn formula_terms(n: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::Invalid("n must be at least 1".into()));
    }
    Ok(FORMULA_LOG_COEF * (n as f64).ln() + FORMULA_ISF_COEF * normal::isf(alpha))
}

/// Least-squares fit to the reference table:
/// `0.075 ln(n) + 0.700 isf(alpha) + 0.860`.
pub fn beta_formula(n: u64, alpha: f64) -> Result<f64> {
    Ok(formula_terms(n, alpha)? + FORMULA_INTERCEPT)
}

/// The fit with its intercept raised to 1.000, which bounds every table entry
/// from above.
pub fn beta_formula_upper(n: u64, alpha: f64) -> Result<f64> {
    Ok(formula_terms(n, alpha)? + FORMULA_UPPER_INTERCEPT)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(v: &[f64]) -> Vec<WalkStatistic> {
        v.iter().copied().map(WalkStatistic).collect()
    }

    #[test]
    fn statistic_of_fixed_walks() {
        assert!((walk_statistic(&[1, 1, -1, -1]).0 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(walk_statistic(&[-1, -1, 1, 1]).0, 0.0);
        assert_eq!(walk_statistic(&[1, -1]).0, 1.0);
        assert_eq!(walk_statistic(&[-1, 1]).0, 0.0);
    }

    #[test]
    fn quantile_examples() {
        let six = stats(&[0.0, 0.0, 1.0 / 3f64.sqrt(), 1.0, 1.0, 2f64.sqrt()]);
        assert_eq!(quantile_beta(&six, 0.5).unwrap(), 1.0 / 3f64.sqrt());
        assert_eq!(quantile_beta(&stats(&[4.0, 2.0, 3.0, 1.0]), 0.25).unwrap(), 3.0);
        assert_eq!(
            quantile_beta(&stats(&[5.0]), 0.5),
            Err(Error::CalibrationInfeasible { alpha: 0.5, trials: 1 })
        );
        assert!(quantile_beta(&[], 0.5).is_err());
        assert!(quantile_beta(&six, 1.0).is_err());
    }

    #[test]
    fn rank_absorbs_decimal_rounding() {
        assert_eq!(quantile_rank(10, 0.9), 1);
        assert_eq!(quantile_rank(10, 0.7), 3);
        assert_eq!(quantile_rank(2, 0.4), 1);
        assert_eq!(quantile_rank(1_000_000, 0.05), 950_000);
        assert_eq!(quantile_rank(1_000_000, 0.01), 990_000);
        assert_eq!(quantile_rank(3, 0.5), 1);
    }

    #[test]
    fn formula_values() {
        assert!((beta_formula(50_000, 0.10).unwrap() - 2.568).abs() < 1e-3);
        let expected = 0.075 * 10_000f64.ln() + 0.700 * 1.644_853_626_951_472 + 0.860;
        assert!((beta_formula(10_000, 0.05).unwrap() - expected).abs() < 1e-12);
        assert!((beta_formula(10_000, 0.05).unwrap() - 2.702).abs() < 1e-3);
        assert!((beta_formula(1, 0.5).unwrap() - 0.860).abs() < 1e-15);
        assert!((beta_formula_upper(1, 0.5).unwrap() - 1.000).abs() < 1e-15);
        assert!((beta_formula_upper(50_000, 0.10).unwrap() - 2.708).abs() < 1e-3);
        assert!(beta_formula(0, 0.5).is_err());
        assert!(beta_formula(10, 0.0).is_err());
    }

    #[test]
    fn tied_walk_spec() {
        assert!(TiedWalkSpec::new(0).is_err());
        let odd = TiedWalkSpec::new(5).unwrap();
        assert_eq!((odd.sum_target(), odd.up_steps()), (1, 3));
        let even = TiedWalkSpec::new(6).unwrap();
        assert_eq!((even.sum_target(), even.up_steps()), (0, 3));
    }
}
