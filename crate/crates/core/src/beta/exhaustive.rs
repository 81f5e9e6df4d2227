use super::{quantile_beta, walk_statistic, TiedWalkSpec, WalkStatistic};
use crate::error::{Error, Result};

/// Largest walk length [`exhaustive_beta`] will enumerate
/// (C(20, 10) = 184756 arrangements).
pub const MAX_EXHAUSTIVE_N: u64 = 20;

/// The statistic of every distinct tied walk of length `n`, one entry per
/// arrangement of the up-steps.
pub fn enumerate_statistics(n: u64) -> Result<Vec<WalkStatistic>> {
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::ExhaustiveTooLarge {
            n,
            max: MAX_EXHAUSTIVE_N,
        });
    }
    let spec = TiedWalkSpec::new(n)?;
    let ups = spec.up_steps() as u32;
    let mut steps = vec![0i8; n as usize];
    let out = (0u32..1 << n)
        .filter(|mask| mask.count_ones() == ups)
        .map(|mask| {
            for (i, step) in steps.iter_mut().enumerate() {
                *step = if mask >> i & 1 == 1 { 1 } else { -1 };
            }
            walk_statistic(&steps)
        })
        .collect();
    Ok(out)
}

/// The exact finite-population quantile the Monte Carlo estimate converges
/// to: [`quantile_beta`] over all `C(n, ceil(n/2))` equally likely walks.
pub fn exhaustive_beta(n: u64, alpha: f64) -> Result<f64> {
    quantile_beta(&enumerate_statistics(n)?, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let four = exhaustive_beta(4, 0.5).unwrap();
        assert_eq!(four, 1.0 / 3f64.sqrt());
        assert_eq!(format!("{four:.4}"), "0.5774");
        assert_eq!(exhaustive_beta(2, 0.5).unwrap(), 0.0);
        assert_eq!(exhaustive_beta(2, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn n4_multiset() {
        let mut v: Vec<f64> = enumerate_statistics(4).unwrap().iter().map(|s| s.0).collect();
        v.sort_by(f64::total_cmp);
        let expected = [0.0, 0.0, 1.0 / 3f64.sqrt(), 1.0, 1.0, 2f64.sqrt()];
        assert_eq!(v.len(), 6);
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn counts_are_binomial() {
        assert_eq!(enumerate_statistics(5).unwrap().len(), 10);
        assert_eq!(enumerate_statistics(12).unwrap().len(), 924);
    }

    #[test]
    fn refuses_large_n() {
        assert_eq!(
            exhaustive_beta(21, 0.1),
            Err(Error::ExhaustiveTooLarge { n: 21, max: 20 })
        );
    }
}
