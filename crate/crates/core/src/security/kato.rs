//! Kato's concentration inequality for sums of dependent Bernoulli variables.
//!
//! For `chi_1..chi_n` with running sum `Lambda_n`,
//!
//! ```text
//! Pr[ sum_u Pr(chi_u = 1 | F_{u-1}) - Lambda_n >= (b + a(2 Lambda_n / n - 1)) sqrt(n) ]
//!     <= exp[ -2 (b^2 - a^2) / (1 + 4a / (3 sqrt n))^2 ]
//! ```
//!
//! and the `(a, b)` below are the closed-form choice that sets the right-hand
//! side to `eps_ka` while minimizing the deviation for a predicted
//! `Lambda_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatoCoefficients {
    pub a: f64,
    pub b: f64,
    pub a1: f64,
    pub n: f64,
    pub lambda_n: f64,
    pub eps_ka: f64,
    /// `Delta_Ka = [b + a (2 Lambda_n / n - 1)] sqrt(n)`.
    pub delta: f64,
}

impl KatoCoefficients {
    /// Right-hand side of the concentration bound at these coefficients.
    pub fn tail_probability(&self) -> f64 {
        kato_tail(self.a, self.b, self.n)
    }
}

/// `exp[-2(b^2 - a^2) / (1 + 4a/(3 sqrt n))^2]`.
pub fn kato_tail(a: f64, b: f64, n: f64) -> f64 {
    let d = 1.0 + 4.0 * a / (3.0 * n.sqrt());
    (-2.0 * (b * b - a * a) / (d * d)).exp()
}

fn checked_sqrt(what: &str, x: f64) -> f64 {
    // ln(eps_ka) < 0 keeps every radicand nonnegative; anything else is a bug.
    assert!(x >= 0.0 || x > -1e-9 * x.abs().max(1.0), "negative radicand in {what}: {x}");
    x.max(0.0).sqrt()
}

/// Deviation term `Delta_Ka(n, Lambda_n, eps_ka)` and its coefficients.
///
/// As `Lambda_n -> n` the two terms of `Delta_Ka` cancel, so its error is of
/// order `ulp(n)` in absolute counts. At `Lambda_n = n` it tends to zero and
/// the tail expression is `0/0`.
pub fn kato_correction(n: f64, lambda_n: f64, eps_ka: f64) -> Result<KatoCoefficients> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::domain(format!("Kato sample size n = {n} must be >= 1")));
    }
    if !(0.0..=n).contains(&lambda_n) {
        return Err(Error::domain(format!(
            "Kato count Lambda_n = {lambda_n} must be in [0, n = {n}]"
        )));
    }
    if !(eps_ka > 0.0 && eps_ka < 1.0) {
        return Err(Error::domain(format!("eps_ka = {eps_ka} must be in (0, 1)")));
    }

    let ln_eps = eps_ka.ln();
    let sqrt_n = n.sqrt();
    let spread = 9.0 * lambda_n * (n - lambda_n) - 2.0 * n * ln_eps;
    let a1 = checked_sqrt("a1", -n * n * ln_eps * spread);

    let a_num = 3.0
        * (72.0 * sqrt_n * lambda_n * (n - lambda_n) * ln_eps
            - 16.0 * n.powf(1.5) * ln_eps * ln_eps
            + 9.0 * std::f64::consts::SQRT_2 * (n - 2.0 * lambda_n) * a1);
    let a_den = 4.0 * (9.0 * n - 8.0 * ln_eps) * spread;
    let a = a_num / a_den;

    let b_rad = 18.0 * a * a * n - (16.0 * a * a + 24.0 * a * sqrt_n + 9.0 * n) * ln_eps;
    let b = checked_sqrt("b", b_rad) / (3.0 * (2.0 * n).sqrt());

    let delta = (b + a * (2.0 * lambda_n / n - 1.0)) * sqrt_n;
    Ok(KatoCoefficients {
        a,
        b,
        a1,
        n,
        lambda_n,
        eps_ka,
        delta,
    })
}
