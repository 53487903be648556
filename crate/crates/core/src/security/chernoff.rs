//! Closed-form Chernoff conversions between observed and expected counts.

use serde::{Deserialize, Serialize};

/// Logarithm used for `beta = log(1/eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
    Base10,
}

impl LogBase {
    pub fn beta(self, eps: f64) -> f64 {
        let inv = 1.0 / eps;
        match self {
            LogBase::Natural => inv.ln(),
            LogBase::Base2 => inv.log2(),
            LogBase::Base10 => inv.log10(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "2" | "log2" => Ok(LogBase::Base2),
            "10" | "log10" => Ok(LogBase::Base10),
            other => Err(format!("unknown log base `{other}` (expected ln, log2 or log10)")),
        }
    }
}

/// Upper bound on the expectation given an observation:
/// `phi_U(x) = x + beta + sqrt(2 beta x + beta^2)`.
pub fn chernoff_expected_ub_beta(x: f64, beta: f64) -> f64 {
    x + beta + (2.0 * beta * x + beta * beta).sqrt()
}

/// Upper bound on the observation given an expectation:
/// `Phi_U(x) = x + beta/2 + sqrt(2 beta x + beta^2/4)`.
pub fn chernoff_observed_ub_beta(x: f64, beta: f64) -> f64 {
    x + beta / 2.0 + (2.0 * beta * x + beta * beta / 4.0).sqrt()
}

/// [`chernoff_expected_ub_beta`] with `beta = ln(1/eps)`.
pub fn chernoff_expected_ub(x: f64, eps: f64) -> f64 {
    chernoff_expected_ub_beta(x, LogBase::Natural.beta(eps))
}

/// [`chernoff_observed_ub_beta`] with `beta = ln(1/eps)`.
pub fn chernoff_observed_ub(x: f64, eps: f64) -> f64 {
    chernoff_observed_ub_beta(x, LogBase::Natural.beta(eps))
}
