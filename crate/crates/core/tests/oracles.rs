//! Independent checks of the stopping constant against exact enumeration and
//! a reference normal CDF.

use clipaudit::beta::{
    enumerate_statistics, exhaustive_beta, quantile_beta, simulate_beta, walk_statistic,
    simulate_statistics, CalibrationJob, WalkStatistic,
};
use clipaudit::normal::isf;
use statrs::function::erf::erf;

fn phi(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

#[test]
fn isf_matches_erf_reference() {
    for alpha in [0.01, 0.05, 0.1, 0.5, 0.2, 0.001, 0.3] {
        let x = isf(alpha);
        assert!((phi(x) - (1.0 - alpha)).abs() <= 1e-9, "alpha={alpha}: Phi({x})");
    }
    assert!((isf(0.05) - 1.64485).abs() < 1e-5);
}

/// Statistics of all walks of length `n` with exactly `ups` up-steps,
/// computed from the definition.
fn brute_force(n: u32, ups: u32) -> Vec<f64> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() == ups)
        .map(|m| {
            let steps: Vec<i8> = (0..n).map(|i| if m >> i & 1 == 1 { 1 } else { -1 }).collect();
            walk_statistic(&steps).0
        })
        .collect()
}

#[test]
fn tied_race_risk_is_bounded_exactly() {
    for n in 2..=16u64 {
        let all = enumerate_statistics(n).unwrap();
        let m = all.len() as f64;
        for alpha in [0.05, 0.1, 0.25, 0.5] {
            let Ok(beta) = exhaustive_beta(n, alpha) else { continue };
            let crossing = all.iter().filter(|s| s.0 > beta).count() as f64;
            assert!(
                crossing / m <= (alpha * m).ceil() / m,
                "n={n} alpha={alpha}: {crossing}/{m} cross beta={beta}"
            );
        }
    }
}

#[test]
fn losing_winner_crosses_less_often_than_a_tie() {
    // A reported winner who actually lost is accepted no more often than in
    // an exact tie, at the tie-calibrated beta.
    let n = 14u32;
    for alpha in [0.1, 0.25, 0.5] {
        let beta = exhaustive_beta(u64::from(n), alpha).unwrap();
        let rate = |ups: u32| {
            let s = brute_force(n, ups);
            s.iter().filter(|&&x| x > beta).count() as f64 / s.len() as f64
        };
        let tie = rate(n / 2);
        for ups in 0..n / 2 {
            assert!(rate(ups) <= tie, "ups={ups} alpha={alpha}");
        }
    }
}

#[test]
fn enumeration_agrees_with_brute_force() {
    for n in [3u32, 6, 9] {
        let mut a: Vec<f64> = enumerate_statistics(u64::from(n)).unwrap().iter().map(|s| s.0).collect();
        let mut b = brute_force(n, n.div_ceil(2));
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }
}

#[test]
fn simulated_distribution_matches_enumeration() {
    // Small n has a handful of atoms, so compare atom frequencies rather than
    // quantiles, which jump between atoms under sampling noise.
    const TRIALS: u64 = 100_000;
    for n in [4u64, 7, 10] {
        let mut exact: Vec<f64> = enumerate_statistics(n).unwrap().iter().map(|s| s.0.max(0.0)).collect();
        let m = exact.len() as f64;
        exact.sort_by(f64::total_cmp);
        exact.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let sims = simulate_statistics(n, TRIALS, 5, 1, None).unwrap();
        let all = enumerate_statistics(n).unwrap();
        for atom in exact {
            let p = all.iter().filter(|s| (s.0.max(0.0) - atom).abs() < 1e-12).count() as f64 / m;
            let f = sims.iter().filter(|&&s| (s - atom).abs() < 1e-12).count() as f64 / TRIALS as f64;
            let sigma = (p * (1.0 - p) / TRIALS as f64).sqrt();
            assert!((f - p).abs() <= 5.0 * sigma, "n={n} atom={atom}: {f} vs {p}");
        }
    }
}

#[test]
fn simulated_beta_is_an_atom_near_the_exact_quantile() {
    let job = CalibrationJob { n: 10, alphas: vec![0.05, 0.1, 0.25, 0.5], trials: 100_000, seed: 5, parallelism: 1 };
    let all = enumerate_statistics(10).unwrap();
    for row in simulate_beta(&job, None).unwrap() {
        let exact = exhaustive_beta(10, row.alpha).unwrap();
        let cdf = |x: f64| all.iter().filter(|s| s.0 <= x + 1e-12).count() as f64 / all.len() as f64;
        // Same atom, or an adjacent atom whose CDF straddles 1 - alpha.
        assert!(
            (row.beta - exact).abs() < 1e-12 || (cdf(row.beta.min(exact)) - (1.0 - row.alpha)).abs() < 0.01,
            "alpha={}: {} vs {exact}",
            row.alpha,
            row.beta
        );
    }
}

#[test]
fn n4_quantile_from_statistics() {
    let stats: Vec<WalkStatistic> = enumerate_statistics(4).unwrap();
    assert_eq!(quantile_beta(&stats, 0.5).unwrap(), 1.0 / 3f64.sqrt());
}
