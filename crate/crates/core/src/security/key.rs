use serde::{Deserialize, Serialize};

use super::budget::SecurityBudget;
use crate::error::Result;
use crate::numerics::binary_entropy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLength {
    /// Secret bits, floored at zero.
    pub ell: f64,
    /// `ell / N`.
    pub rate: f64,
    /// Bracket `1 - H(E_p) - f H(E_b)` before the bit charges.
    pub bracket: f64,
}

/// `ell = n_mu [1 - H(E_p) - f H(E_b)] - xi - xi'`, floored at zero.
///
/// `E_p` is clamped to 1/2 before the entropy.
pub fn key_length(
    n_mu: f64,
    ep_m_bar: f64,
    e_b: f64,
    f_ec: f64,
    budget: &SecurityBudget,
    n_rounds: f64,
) -> Result<KeyLength> {
    let bracket = 1.0 - binary_entropy(ep_m_bar.clamp(0.0, 0.5))? - f_ec * binary_entropy(e_b)?;
    let raw = n_mu * bracket - budget.xi - budget.xi_prime;
    let ell = raw.max(0.0);
    Ok(KeyLength {
        ell,
        rate: ell / n_rounds,
        bracket,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_phase_error_leaves_nothing() {
        let k = key_length(1e6, 0.5, 0.01, 1.16, &SecurityBudget::default(), 1e11).unwrap();
        assert_eq!(k.ell, 0.0);
        assert_eq!(k.rate, 0.0);
        let k = key_length(1e6, 0.9, 0.01, 1.16, &SecurityBudget::default(), 1e11).unwrap();
        assert_eq!(k.ell, 0.0);
    }

    #[test]
    fn bounded_by_sifted_bits() {
        let k = key_length(1e6, 0.0, 0.0, 1.16, &SecurityBudget::default(), 1e11).unwrap();
        assert!(k.ell <= 1e6);
        assert!((k.ell - (1e6 - SecurityBudget::default().xi - SecurityBudget::default().xi_prime)).abs() < 1e-6);
    }
}
