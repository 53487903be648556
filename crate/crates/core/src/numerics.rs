//! Scalar kernels: binary entropy, Poisson weights and the photon-number
//! weights of an `M`-slice phase-randomized coherent state.
//!
//! All factorial ratios go through `ln k!`, so nothing here overflows for
//! large photon numbers.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Relative size below which a series term is dropped.
pub const SERIES_REL_TOL: f64 = 1e-18;

/// Photon numbers for which [`pseudo_fock_weight_ub`] has a closed form.
pub const SUPPORTED_EVEN_K: [u32; 4] = [0, 2, 4, 6];

/// Weight `P^mu_M(k)` of the `k`-th residue class of an `M`-slice
/// phase-randomized coherent state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoFockWeight {
    pub mu: f64,
    pub m_slices: u32,
    pub k: u32,
    pub weight: f64,
}

fn check_probability(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("{name} = {x} is not in [0, 1]")));
    }
    Ok(())
}

fn check_intensity(mu: f64) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!("intensity mu = {mu} must be finite and >= 0")));
    }
    Ok(())
}

/// `H(x) = -x log2 x - (1-x) log2 (1-x)`, exact at the endpoints.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    // ln_1p keeps the (1-x) term accurate for tiny x.
    Ok((-x * x.ln() - (1.0 - x) * (-x).ln_1p()) / std::f64::consts::LN_2)
}

/// `ln(mu^k e^-mu / k!)`; `-inf` for `mu = 0, k > 0`.
fn ln_poisson(mu: f64, k: u64) -> f64 {
    if k == 0 {
        return -mu;
    }
    if mu == 0.0 {
        return f64::NEG_INFINITY;
    }
    -mu + k as f64 * mu.ln() - ln_factorial(k)
}

/// Poisson probability `e^-mu mu^k / k!`.
pub fn poisson_pmf(mu: f64, k: u64) -> Result<f64> {
    check_intensity(mu)?;
    if k == 0 {
        return Ok((-mu).exp());
    }
    Ok(ln_poisson(mu, k).exp())
}

/// `sum_{l>=0} mu^(lM+k) e^-mu / (lM+k)!`.
pub fn pseudo_fock_weight(mu: f64, m_slices: u32, k: u32) -> Result<PseudoFockWeight> {
    check_intensity(mu)?;
    if m_slices < 2 {
        return Err(Error::domain(format!("m_slices = {m_slices} must be >= 2")));
    }
    if k >= m_slices {
        return Err(Error::domain(format!(
            "residue k = {k} must be < m_slices = {m_slices}"
        )));
    }

    let mut sum = 0.0_f64;
    let mut prev = f64::INFINITY;
    for l in 0u64.. {
        let n = l * m_slices as u64 + k as u64;
        let term = ln_poisson(mu, n).exp();
        sum += term;
        // Terms rise until n passes mu, then fall monotonically.
        let past_mode = n as f64 >= mu && term <= prev;
        if past_mode && (term <= SERIES_REL_TOL * sum || term == 0.0) {
            break;
        }
        prev = term;
    }

    Ok(PseudoFockWeight {
        mu,
        m_slices,
        k,
        weight: sum.min(1.0),
    })
}

/// `e^-mu * sum_{j >= j0} mu^(2j) / (2j)!`, evaluated term by term.
fn even_poisson_tail(mu: f64, j0: u32) -> f64 {
    if mu == 0.0 {
        return if j0 == 0 { 1.0 } else { 0.0 };
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for j in j0 as u64.. {
        let n = 2 * j;
        let term = ln_poisson(mu, n).exp();
        sum += term;
        if n as f64 >= mu && term <= prev && (term <= SERIES_REL_TOL * sum || term == 0.0) {
            break;
        }
        prev = term;
    }
    sum
}

/// Closed-form upper bound on `P^mu_M(k)` for even `k <= 6`.
///
/// The bounds relax the step-`M` series to a step-2 series over even photon
/// numbers starting at `k`:
///
/// ```text
/// k = 0: (1 + e^-2mu) / 2
/// k = 2: (1 + e^-2mu - 2e^-mu) / 2
/// k = 4: (1 + e^-2mu - 2e^-mu - mu^2 e^-mu) / 2
/// k = 6: (1 + e^-2mu - 2e^-mu - mu^2 e^-mu - 2 mu^4 e^-mu / 4!) / 2
/// ```
///
/// Each expression equals `e^-mu * sum_{j >= k/2} mu^2j / (2j)!`; that form is
/// what gets evaluated because the differences above cancel catastrophically
/// for small `mu`.
pub fn pseudo_fock_weight_ub(mu: f64, m_slices: u32, k: u32) -> Result<f64> {
    check_intensity(mu)?;
    if !SUPPORTED_EVEN_K.contains(&k) {
        return Err(Error::domain(format!(
            "no closed-form bound for k = {k}; supported values are 0, 2, 4, 6"
        )));
    }
    if m_slices % 2 != 0 || m_slices < k + 2 {
        return Err(Error::domain(format!(
            "bound for k = {k} needs an even m_slices >= {}, got {m_slices}",
            k + 2
        )));
    }
    Ok(even_poisson_tail(mu, k / 2))
}

/// `sqrt(k! mu^M / (M+k)!)`, the fidelity factor of the even-photon
/// deviation bound.
pub fn fock_overlap_factor(mu: f64, m_slices: u32, k: u32) -> Result<f64> {
    check_intensity(mu)?;
    if mu == 0.0 {
        return Ok(0.0);
    }
    let ln = ln_factorial(k as u64) + m_slices as f64 * mu.ln()
        - ln_factorial((m_slices + k) as u64);
    Ok((0.5 * ln).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_endpoints_and_peak() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
    }

    #[test]
    fn entropy_rejects_out_of_range() {
        assert!(matches!(binary_entropy(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(binary_entropy(1.5), Err(Error::Domain(_))));
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn poisson_vacuum_term_is_exact() {
        for mu in [0.0, 1e-4, 3.2e-3, 0.5, 7.0] {
            assert_eq!(poisson_pmf(mu, 0).unwrap(), (-mu).exp());
        }
        assert_eq!(poisson_pmf(0.0, 3).unwrap(), 0.0);
        assert!(poisson_pmf(-1.0, 0).is_err());
    }

    #[test]
    fn poisson_handles_large_k_without_overflow() {
        let p = poisson_pmf(150.0, 400).unwrap();
        assert!(p.is_finite() && p > 0.0 && p < 1e-30);
    }

    #[test]
    fn pseudo_fock_vacuum_limit() {
        assert_eq!(pseudo_fock_weight(0.0, 8, 0).unwrap().weight, 1.0);
        for k in 1..8 {
            assert_eq!(pseudo_fock_weight(0.0, 8, k).unwrap().weight, 0.0);
        }
    }

    #[test]
    fn pseudo_fock_rejects_bad_residue() {
        assert!(pseudo_fock_weight(0.1, 8, 8).is_err());
        assert!(pseudo_fock_weight(0.1, 1, 0).is_err());
    }

    #[test]
    fn bound_at_zero_intensity() {
        assert_eq!(pseudo_fock_weight_ub(0.0, 8, 0).unwrap(), 1.0);
        assert_eq!(pseudo_fock_weight_ub(0.0, 8, 2).unwrap(), 0.0);
    }

    #[test]
    fn bound_rejects_unsupported_inputs() {
        assert!(pseudo_fock_weight_ub(0.01, 8, 8).is_err());
        assert!(pseudo_fock_weight_ub(0.01, 8, 3).is_err());
        assert!(pseudo_fock_weight_ub(0.01, 6, 6).is_err());
        assert!(pseudo_fock_weight_ub(0.01, 7, 0).is_err());
    }

    #[test]
    fn bound_matches_printed_closed_forms_at_moderate_intensity() {
        // The printed differences cancel terms of order one, so compare absolutely.
        let mu: f64 = 0.7;
        let e1 = (-mu).exp();
        let e2 = (-2.0 * mu).exp();
        let printed = [
            (1.0 + e2) / 2.0,
            (1.0 + e2 - 2.0 * e1) / 2.0,
            (1.0 + e2 - 2.0 * e1 - mu * mu * e1) / 2.0,
            (1.0 + e2 - 2.0 * e1 - mu * mu * e1 - 2.0 * mu.powi(4) * e1 / 24.0) / 2.0,
        ];
        for (k, want) in SUPPORTED_EVEN_K.iter().zip(printed) {
            let got = pseudo_fock_weight_ub(mu, 8, *k).unwrap();
            assert!((got - want).abs() <= 1e-15, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn overlap_factor_vanishes_without_light() {
        assert_eq!(fock_overlap_factor(0.0, 8, 2).unwrap(), 0.0);
        let f = fock_overlap_factor(1e-3, 6, 0).unwrap();
        let want = (1e-18_f64 / 720.0).sqrt();
        assert!((f - want).abs() < 1e-12 * want);
    }
}
