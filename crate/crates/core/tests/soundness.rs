//! Worst-case checks of the phase-error and concentration bounds against
//! models where the truth is known.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pmqkd::numerics::poisson_pmf;
use pmqkd::security::{kato_correction, phase_error_continuous};

/// Toy source whose only even photon numbers are 0 and 2; every yield is
/// known, so the phase error rate is exact.
#[test]
fn continuous_bound_covers_two_photon_toy_model() {
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut checked = 0;
    for &mu in &[1e-4, 1e-3, 1e-2, 0.1, 0.5] {
        let p: Vec<f64> = (0..4).map(|n| poisson_pmf(mu, n).unwrap()).collect();
        for &y0 in &grid {
            for &y1 in &grid {
                for &y2 in &grid {
                    for &y3 in &grid {
                        let q = p[0] * y0 + p[1] * y1 + p[2] * y2 + p[3] * y3;
                        if q <= 0.0 {
                            continue;
                        }
                        let truth = (p[0] * y0 + p[2] * y2) / q;
                        let bound = phase_error_continuous(mu, q, y0).unwrap();
                        assert!(
                            bound >= truth * (1.0 - 1e-12),
                            "mu={mu} Y=({y0},{y1},{y2},{y3}): bound {bound} < truth {truth}"
                        );
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 70_000);
}

#[test]
fn toy_bound_is_tight_when_two_photon_yield_saturates() {
    // Y_2 = 1 and no higher even terms: the only slack is sum_{k>=2} P(2k).
    let mu = 1e-3;
    let p: Vec<f64> = (0..3).map(|n| poisson_pmf(mu, n).unwrap()).collect();
    let q = p[0] * 0.1 + p[1] * 0.3 + p[2];
    let truth = (p[0] * 0.1 + p[2]) / q;
    let bound = phase_error_continuous(mu, q, 0.1).unwrap();
    let slack = poisson_pmf(mu, 4).unwrap() * 1.01 / q;
    assert!(bound >= truth && bound - truth <= slack, "{bound} vs {truth}");
}

/// Azuma-Hoeffding deviation for martingale differences bounded by one.
fn azuma_delta(n: f64, eps: f64) -> f64 {
    (2.0 * n * (1.0 / eps).ln()).sqrt()
}

#[test]
fn kato_is_tighter_than_azuma() {
    for n in [1e4, 1e5, 1e6, 1e8] {
        for frac in [0.0, 0.01, 0.1, 0.2, 0.5] {
            let k = kato_correction(n, frac * n, 1e-10).unwrap();
            let azuma = azuma_delta(n, 1e-10);
            assert!(k.delta < azuma, "n={n} frac={frac}: {} vs {azuma}", k.delta);
        }
    }
    // Far from balance the gain is large.
    let k = kato_correction(1e6, 1e4, 1e-10).unwrap();
    assert!(k.delta < 0.25 * azuma_delta(1e6, 1e-10));
}

#[test]
fn kato_failure_rate_stays_below_budget() {
    // Independent Bernoulli(p) trials; the bound may fail with probability at
    // most eps, evaluated at the observed count.
    let (n, p, eps, trials) = (2_000usize, 0.1, 0.05, 4_000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = 0;
    for _ in 0..trials {
        let lambda = (0..n).filter(|_| rng.random::<f64>() < p).count() as f64;
        let k = kato_correction(n as f64, lambda, eps).unwrap();
        if n as f64 * p - lambda >= k.delta {
            failures += 1;
        }
    }
    let rate = failures as f64 / trials as f64;
    let sigma = (eps * (1.0 - eps) / trials as f64).sqrt();
    assert!(rate <= eps + 3.0 * sigma, "failure rate {rate}");
}
