//! Phase-error bounds: continuous randomization, the discrete-slice
//! correction and the Kato lift to coherent attacks.

use serde::{Deserialize, Serialize};

use super::kato::{kato_correction, KatoCoefficients};
use crate::error::{Error, Result};
use crate::numerics::{fock_overlap_factor, pseudo_fock_weight_ub};

/// Slice counts with a closed-form deviation bound for every even class.
pub const SUPPORTED_SLICES: [u32; 2] = [6, 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorBreakdown {
    /// `e^-mu Y0 / Q`.
    pub vacuum_term: f64,
    /// `(e^-2mu + 1 - 2 e^-mu) / (2Q)`, all even multiphoton yields set to 1.
    pub multiphoton_term: f64,
    /// `delta_2k` for `k = 0 .. M/2 - 1`.
    pub deviations: Vec<f64>,
    /// Discrete-phase phase error rate before the Kato correction.
    pub ep_m: f64,
    /// `Delta_Ka / n_mu`.
    pub kato_delta: f64,
    /// Final phase error rate, not clamped.
    pub ep_m_bar: f64,
}

impl PhaseErrorBreakdown {
    pub fn continuous(&self) -> f64 {
        self.vacuum_term + self.multiphoton_term
    }

    pub fn deviation_sum(&self) -> f64 {
        self.deviations.iter().sum()
    }

    /// Share of `ep_m` contributed by the discrete-slice deviations.
    pub fn deviation_share(&self) -> f64 {
        if self.ep_m > 0.0 {
            self.deviation_sum() / self.ep_m
        } else {
            0.0
        }
    }

    /// Rate that enters the entropy term; values above 1/2 carry no key.
    pub fn clamped(&self) -> f64 {
        self.ep_m_bar.min(0.5)
    }
}

fn check_gain(q_mu: f64) -> Result<()> {
    if !(q_mu > 0.0) {
        return Err(Error::domain(format!("gain Q_mu = {q_mu} must be > 0")));
    }
    Ok(())
}

/// Returns `(vacuum_term, multiphoton_term)`; their sum bounds the phase error
/// rate under continuous phase randomization.
pub fn phase_error_terms(mu: f64, q_mu: f64, y0_bar: f64) -> Result<(f64, f64)> {
    check_gain(q_mu)?;
    let vacuum = (-mu).exp() * y0_bar / q_mu;
    // e^-2mu + 1 - 2e^-mu = (1 - e^-mu)^2
    let multiphoton = (-mu).exp_m1().powi(2) / (2.0 * q_mu);
    Ok((vacuum, multiphoton))
}

pub fn phase_error_continuous(mu: f64, q_mu: f64, y0_bar: f64) -> Result<f64> {
    let (v, m) = phase_error_terms(mu, q_mu, y0_bar)?;
    Ok(v + m)
}

/// `delta_k <= P^mu_M(k)/Q * sqrt(k! mu^M / (M+k)!)` with the closed-form
/// bound on `P^mu_M(k)`.
pub fn deviation_bound(mu: f64, m_slices: u32, k: u32, q_mu: f64) -> Result<f64> {
    check_gain(q_mu)?;
    if !SUPPORTED_SLICES.contains(&m_slices) || k % 2 != 0 || k + 2 > m_slices {
        return Err(Error::domain(format!(
            "no deviation bound for k = {k} with M = {m_slices} (M in {{6, 8}}, even k < M)"
        )));
    }
    let weight = pseudo_fock_weight_ub(mu, m_slices, k)?;
    Ok(weight / q_mu * fock_overlap_factor(mu, m_slices, k)?)
}

/// Phase error rate for `M`-slice randomization, Kato fields left at zero.
pub fn phase_error_discrete(
    mu: f64,
    m_slices: u32,
    q_mu: f64,
    y0_bar: f64,
) -> Result<PhaseErrorBreakdown> {
    if !SUPPORTED_SLICES.contains(&m_slices) {
        return Err(Error::domain(format!("m_slices = {m_slices} must be 6 or 8")));
    }
    let (vacuum_term, multiphoton_term) = phase_error_terms(mu, q_mu, y0_bar)?;
    let deviations = (0..m_slices / 2)
        .map(|k| deviation_bound(mu, m_slices, 2 * k, q_mu))
        .collect::<Result<Vec<_>>>()?;
    let ep_m = vacuum_term + multiphoton_term + deviations.iter().sum::<f64>();
    Ok(PhaseErrorBreakdown {
        vacuum_term,
        multiphoton_term,
        deviations,
        ep_m,
        kato_delta: 0.0,
        ep_m_bar: ep_m,
    })
}

/// `(n E + Delta_Ka(n, n E, eps_ka)) / n` with the plug-in prediction
/// `Lambda_n = n E` (capped at `n`).
pub fn phase_error_final(n_mu: f64, ep_m: f64, eps_ka: f64) -> Result<(f64, KatoCoefficients)> {
    if !(n_mu >= 1.0) {
        return Err(Error::NoData(format!(
            "sifted key size n_mu = {n_mu} is below one bit"
        )));
    }
    if !(ep_m >= 0.0) {
        return Err(Error::domain(format!("phase error rate {ep_m} must be >= 0")));
    }
    let lambda = (n_mu * ep_m).min(n_mu);
    let kato = kato_correction(n_mu, lambda, eps_ka)?;
    // Delta_Ka can dip a hair below zero at Lambda_n = n from rounding.
    let ep_m_bar = (n_mu * ep_m + kato.delta.max(0.0)) / n_mu;
    Ok((ep_m_bar, kato))
}

/// Runs the discrete bound and the Kato correction together.
pub fn phase_error_with_kato(
    mu: f64,
    m_slices: u32,
    q_mu: f64,
    y0_bar: f64,
    n_mu: f64,
    eps_ka: f64,
) -> Result<(PhaseErrorBreakdown, KatoCoefficients)> {
    let mut pe = phase_error_discrete(mu, m_slices, q_mu, y0_bar)?;
    let (ep_m_bar, kato) = phase_error_final(n_mu, pe.ep_m, eps_ka)?;
    pe.ep_m_bar = ep_m_bar;
    pe.kato_delta = ep_m_bar - pe.ep_m;
    Ok((pe, kato))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_only() {
        let q = 2e-5;
        assert_eq!(phase_error_continuous(0.0, q, q).unwrap(), 1.0);
    }

    #[test]
    fn multiphoton_second_order() {
        let (mu, q) = (1e-3_f64, 1e-5);
        let ep = phase_error_continuous(mu, q, 0.0).unwrap();
        let approx = mu * mu / (2.0 * q);
        assert!(((ep - approx) / approx).abs() < 2e-3);
    }

    #[test]
    fn no_deviation_without_light() {
        for (m, k) in [(6, 0), (6, 2), (6, 4), (8, 0), (8, 2), (8, 4), (8, 6)] {
            assert_eq!(deviation_bound(0.0, m, k, 1e-5).unwrap(), 0.0);
        }
    }

    #[test]
    fn deviation_shrinks_with_more_slices() {
        for k in [0, 2, 4] {
            let d6 = deviation_bound(0.01, 6, k, 1e-4).unwrap();
            let d8 = deviation_bound(0.01, 8, k, 1e-4).unwrap();
            assert!(d8 < d6, "k={k}");
        }
    }

    #[test]
    fn unsupported_classes() {
        assert!(deviation_bound(0.01, 6, 6, 1e-4).is_err());
        assert!(deviation_bound(0.01, 8, 3, 1e-4).is_err());
        assert!(deviation_bound(0.01, 16, 0, 1e-4).is_err());
        assert!(phase_error_discrete(0.01, 4, 1e-4, 0.0).is_err());
        assert!(phase_error_continuous(0.01, 0.0, 0.0).is_err());
    }

    #[test]
    fn even_classes_per_slice_count() {
        assert_eq!(phase_error_discrete(1e-3, 8, 1e-5, 1e-7).unwrap().deviations.len(), 4);
        assert_eq!(phase_error_discrete(1e-3, 6, 1e-5, 1e-7).unwrap().deviations.len(), 3);
    }

    #[test]
    fn discrete_equals_continuous_at_zero_intensity() {
        let pe = phase_error_discrete(0.0, 8, 1e-5, 1e-6).unwrap();
        assert_eq!(pe.ep_m, phase_error_continuous(0.0, 1e-5, 1e-6).unwrap());
    }

    #[test]
    fn kato_raises_and_requires_data() {
        let (bar, _) = phase_error_final(91781.0, 0.14, 1e-10).unwrap();
        assert!(bar > 0.14);
        assert!(matches!(phase_error_final(0.0, 0.1, 1e-10), Err(Error::NoData(_))));
    }

    #[test]
    fn kato_gap_shrinks_with_more_bits() {
        let gap = |n: f64| phase_error_final(n, 0.1, 1e-10).unwrap().0 - 0.1;
        assert!(gap(1e4) > gap(1e6) && gap(1e6) > gap(1e8));
    }
}
