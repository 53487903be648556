use serde::{Deserialize, Serialize};

use super::chernoff::{chernoff_expected_ub_beta, chernoff_observed_ub_beta};
use super::Conventions;
use crate::error::{Error, Result};

/// Which rounds the vacuum-click count is normalized against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VacuumNormalization {
    /// `N (1-p_s) e^-mu`: every non-test round, whether sifted or not.
    AllRounds,
    /// `(2/M) N (1-p_s) e^-mu`: only the phase-matched rounds that can
    /// contribute a sifted bit. With this choice the vacuum share of the sifted
    /// key is `n0 / n_mu`, i.e. at least twice the error rate.
    #[default]
    SiftedRounds,
}

impl std::str::FromStr for VacuumNormalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" | "all_rounds" => Ok(Self::AllRounds),
            "sifted" | "sifted_rounds" => Ok(Self::SiftedRounds),
            other => Err(format!("unknown vacuum normalization `{other}` (expected all or sifted)")),
        }
    }
}

/// Every intermediate of the vacuum-yield chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VacuumYieldBound {
    pub m_s: f64,
    pub beta: f64,
    /// Expected sampled error count, upper bound.
    pub m_s_star: f64,
    /// Expected error count in the key, upper bound.
    pub m_star: f64,
    /// Expected vacuum-click count, upper bound.
    pub n0_star: f64,
    /// Observed vacuum-click count, upper bound.
    pub n0: f64,
    pub y0_bar: f64,
}

/// Upper bound on the vacuum yield from the sampled error count.
///
/// All errors are attributed to vacuum events, which err half of the time, so
/// the vacuum click count is bounded by twice the error count.
pub fn vacuum_yield_ub(
    m_s: f64,
    p_s: f64,
    n_rounds: f64,
    mu: f64,
    eps: f64,
    m_slices: u32,
    conv: &Conventions,
) -> Result<VacuumYieldBound> {
    if !(m_s >= 0.0) {
        return Err(Error::domain(format!("sampled error count {m_s} must be >= 0")));
    }
    if !(p_s > 0.0 && p_s < 1.0) {
        return Err(Error::domain(format!(
            "sampling fraction p_s = {p_s} must be in (0, 1); sampling is mandatory"
        )));
    }
    if !(n_rounds > 0.0) {
        return Err(Error::domain(format!("round count N = {n_rounds} must be > 0")));
    }
    if !(mu >= 0.0) {
        return Err(Error::domain(format!("intensity mu = {mu} must be >= 0")));
    }
    let beta = conv.log_base.beta(eps);
    let m_s_star = chernoff_expected_ub_beta(m_s, beta);
    let m_star = (1.0 - p_s) / p_s * m_s_star;
    let n0_star = 2.0 * m_star;
    let n0 = chernoff_observed_ub_beta(n0_star, beta);
    let rounds = match conv.vacuum_normalization {
        VacuumNormalization::AllRounds => n_rounds * (1.0 - p_s),
        VacuumNormalization::SiftedRounds => 2.0 / m_slices as f64 * n_rounds * (1.0 - p_s),
    };
    let y0_bar = (n0 / (rounds * (-mu).exp())).min(1.0);
    Ok(VacuumYieldBound {
        m_s,
        beta,
        m_s_star,
        m_star,
        n0_star,
        n0,
        y0_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn literal() -> Conventions {
        Conventions {
            vacuum_normalization: VacuumNormalization::AllRounds,
            ..Conventions::default()
        }
    }

    #[test]
    fn zero_errors_composes_both_bounds() {
        let (p_s, n, mu, eps): (f64, f64, f64, f64) = (0.07, 1e11, 1e-3, 0.5e-20);
        let beta = (1.0 / eps).ln();
        let got = vacuum_yield_ub(0.0, p_s, n, mu, eps, 8, &literal()).unwrap();
        let n0_star = 2.0 * (0.93 / 0.07) * 2.0 * beta;
        let n0 = n0_star + beta / 2.0 + (2.0 * beta * n0_star + beta * beta / 4.0).sqrt();
        let want = n0 / (0.93e11 * (-0.001f64).exp());
        assert!((got.y0_bar - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn sifted_normalization_scales_by_half_m() {
        let a = vacuum_yield_ub(40.0, 0.07, 1e11, 1e-3, 1e-10, 8, &literal()).unwrap();
        let b = vacuum_yield_ub(40.0, 0.07, 1e11, 1e-3, 1e-10, 8, &Conventions::default()).unwrap();
        assert!((b.y0_bar / a.y0_bar - 4.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_to_one() {
        let y = vacuum_yield_ub(1e6, 0.5, 10.0, 0.0, 1e-10, 8, &literal()).unwrap();
        assert_eq!(y.y0_bar, 1.0);
    }

    #[test]
    fn sampling_is_mandatory() {
        assert!(vacuum_yield_ub(1.0, 0.0, 1e9, 1e-3, 1e-10, 8, &literal()).is_err());
        assert!(vacuum_yield_ub(1.0, 1.0, 1e9, 1e-3, 1e-10, 8, &literal()).is_err());
    }

    #[test]
    fn finite_size_overhead_shrinks_with_n() {
        // Fixed error fraction: the bound approaches the plug-in value.
        let plug_in = |n: f64| {
            let m_s = 1e-6 * n;
            let y = vacuum_yield_ub(m_s, 0.1, n, 0.0, 1e-10, 8, &literal()).unwrap();
            let asymptotic = 2.0 * 9.0 * m_s / (0.9 * n);
            y.y0_bar / asymptotic - 1.0
        };
        let (a, b, c) = (plug_in(1e6), plug_in(1e9), plug_in(1e12));
        assert!(a > b && b > c && c > 0.0);
        assert!(c < 0.01);
        // Overhead scales like 1/sqrt(N) once the count is large.
        assert!((b / c) > 20.0 && (b / c) < 45.0, "{}", b / c);
    }
}
