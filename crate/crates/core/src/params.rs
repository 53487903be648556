use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::security::{Conventions, SecurityBudget};

pub const DEFAULT_F_EC: f64 = 1.16;
pub const DEFAULT_P_S: f64 = 0.07;
pub const DEFAULT_M_SLICES: u32 = 8;
pub const DEFAULT_N_ROUNDS: f64 = 1e11;

/// Every physical and protocol knob of one run.
///
/// `mu` is the total intensity; Alice and Bob each send `mu / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub mu: f64,
    pub m_slices: u32,
    pub n_rounds: f64,
    pub p_s: f64,
    pub channel: ChannelSpec,
    pub f_ec: f64,
    pub budget: SecurityBudget,
    #[serde(default)]
    pub conventions: Conventions,
}

impl ProtocolParams {
    /// Default settings at the given channel and intensity.
    pub fn new(channel: ChannelSpec, mu: f64) -> Self {
        Self {
            mu,
            m_slices: DEFAULT_M_SLICES,
            n_rounds: DEFAULT_N_ROUNDS,
            p_s: DEFAULT_P_S,
            channel,
            f_ec: DEFAULT_F_EC,
            budget: SecurityBudget::default(),
            conventions: Conventions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::usage("mu", format!("{} must be finite and >= 0", self.mu)));
        }
        if self.m_slices < 2 || self.m_slices % 2 != 0 {
            return Err(Error::usage(
                "m_slices",
                format!("{} must be an even number >= 2", self.m_slices),
            ));
        }
        if !(self.n_rounds >= 1.0 && self.n_rounds.is_finite()) {
            return Err(Error::usage("n_rounds", format!("{} must be >= 1", self.n_rounds)));
        }
        if !(self.p_s > 0.0 && self.p_s < 1.0) {
            return Err(Error::usage("p_s", format!("{} must be in (0, 1)", self.p_s)));
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::usage("f", format!("{} must be >= 1", self.f_ec)));
        }
        self.budget.validate()
    }
}
