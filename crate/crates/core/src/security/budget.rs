use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Failure probabilities and bit charges of the finite-key analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityBudget {
    /// Failure probability of each Chernoff application.
    pub eps: f64,
    /// Failure probability of the Kato concentration bound.
    pub eps_ka: f64,
    /// Privacy-amplification surplus, bits.
    pub xi: f64,
    /// Error-verification tag length, bits.
    pub xi_prime: f64,
}

impl Default for SecurityBudget {
    fn default() -> Self {
        Self {
            eps: 0.5e-20,
            eps_ka: 1e-10,
            xi: (2.0 / 1e-20_f64).log2(),
            xi_prime: (1.0 / 1e-15_f64).log2(),
        }
    }
}

impl SecurityBudget {
    pub fn new(eps: f64, eps_ka: f64, xi: f64, xi_prime: f64) -> Result<Self> {
        let budget = Self {
            eps,
            eps_ka,
            xi,
            xi_prime,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps", self.eps), ("eps_ka", self.eps_ka)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::usage(name, format!("{v} must be in (0, 1)")));
            }
        }
        for (name, v) in [("xi", self.xi), ("xi_prime", self.xi_prime)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::usage(name, format!("{v} must be a positive bit count")));
            }
        }
        Ok(())
    }
}

/// Composed security parameters of the final key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSummary {
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub eps_tot: f64,
}

/// `eps_sec = sqrt(2) sqrt(2 eps + 2^-xi)`, `eps_cor = 2^-xi'`,
/// `eps_tot = eps_sec + eps_cor + eps_ka`.
///
/// The `2 eps` term charges one `eps` for each of the two Chernoff
/// applications in the vacuum-yield chain.
pub fn compose_epsilons(budget: &SecurityBudget) -> EpsilonSummary {
    let eps_sec = 2f64.sqrt() * (2.0 * budget.eps + (-budget.xi).exp2()).sqrt();
    let eps_cor = (-budget.xi_prime).exp2();
    EpsilonSummary {
        eps_sec,
        eps_cor,
        eps_tot: eps_sec + eps_cor + budget.eps_ka,
    }
}
