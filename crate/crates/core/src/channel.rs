//! Closed-form detection model for the symmetric two-arm channel.
//!
//! The quoted channel loss is the end-to-end loss between Alice and Bob; each
//! arm towards the measurement station carries half of it. `eta` is the
//! single-arm transmittance including detector efficiency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fiber attenuation used throughout the simulations, dB/km.
pub const DEFAULT_ALPHA_DB_PER_KM: f64 = 0.168;
pub const DEFAULT_ETA_D: f64 = 0.56;
pub const DEFAULT_P_D: f64 = 1e-8;
pub const DEFAULT_E_D: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    /// Total channel loss in dB (detector excluded).
    TotalDb { total_loss_db: f64 },
    /// Fiber of the given total length.
    Fiber {
        distance_km: f64,
        alpha_db_per_km: f64,
    },
}

impl Loss {
    pub fn total_db(&self) -> f64 {
        match *self {
            Loss::TotalDb { total_loss_db } => total_loss_db,
            Loss::Fiber {
                distance_km,
                alpha_db_per_km,
            } => distance_km * alpha_db_per_km,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub loss: Loss,
    pub eta_d: f64,
    pub p_d: f64,
    pub e_d: f64,
}

impl ChannelSpec {
    pub fn new(loss: Loss, eta_d: f64, p_d: f64, e_d: f64) -> Result<Self> {
        match loss {
            Loss::TotalDb { total_loss_db } => {
                if !(total_loss_db >= 0.0 && total_loss_db.is_finite()) {
                    return Err(Error::usage("loss_db", format!("{total_loss_db} must be >= 0")));
                }
            }
            Loss::Fiber {
                distance_km,
                alpha_db_per_km,
            } => {
                if !(distance_km >= 0.0 && distance_km.is_finite()) {
                    return Err(Error::usage("distance_km", format!("{distance_km} must be >= 0")));
                }
                if !(alpha_db_per_km >= 0.0 && alpha_db_per_km.is_finite()) {
                    return Err(Error::usage(
                        "alpha",
                        format!("{alpha_db_per_km} must be >= 0"),
                    ));
                }
            }
        }
        if !(eta_d > 0.0 && eta_d <= 1.0) {
            return Err(Error::usage("eta_d", format!("{eta_d} must be in (0, 1]")));
        }
        if !(0.0..1.0).contains(&p_d) {
            return Err(Error::usage("p_d", format!("{p_d} must be in [0, 1)")));
        }
        if !(0.0..=0.5).contains(&e_d) {
            return Err(Error::usage("e_d", format!("{e_d} must be in [0, 0.5]")));
        }
        Ok(Self {
            loss,
            eta_d,
            p_d,
            e_d,
        })
    }

    /// Default detector and error parameters with the given loss.
    pub fn with_loss(loss: Loss) -> Result<Self> {
        Self::new(loss, DEFAULT_ETA_D, DEFAULT_P_D, DEFAULT_E_D)
    }

    pub fn from_loss_db(total_loss_db: f64) -> Result<Self> {
        Self::with_loss(Loss::TotalDb { total_loss_db })
    }

    pub fn from_distance_km(distance_km: f64) -> Result<Self> {
        Self::with_loss(Loss::Fiber {
            distance_km,
            alpha_db_per_km: DEFAULT_ALPHA_DB_PER_KM,
        })
    }

    pub fn total_loss_db(&self) -> f64 {
        self.loss.total_db()
    }
}

/// `eta = eta_d * 10^(-(loss/2)/10)`.
pub fn transmittance(spec: &ChannelSpec) -> f64 {
    spec.eta_d * 10f64.powf(-spec.total_loss_db() / 20.0)
}

/// Probability that a round yields exactly one detector click:
/// `Q = (1-p_d)[1 - (1-2p_d) e^{-mu eta}]`.
pub fn gain(mu: f64, eta: f64, p_d: f64) -> f64 {
    let x = mu * eta;
    let no_light = (-x).exp();
    // 1 - (1-2p_d)e^{-x} without cancellation at small x
    (1.0 - p_d) * (-(-x).exp_m1() + 2.0 * p_d * no_light)
}

/// Bit error rate among sifted rounds.
pub fn qber(mu: f64, eta: f64, p_d: f64, e_d: f64) -> Result<f64> {
    let q = gain(mu, eta, p_d);
    if q <= 0.0 {
        return Err(Error::UndefinedRate(format!(
            "gain is zero (mu = {mu}, p_d = {p_d}); QBER undefined"
        )));
    }
    let x = mu * eta;
    let no_light = (-x).exp();
    let right_click = -(-x).exp_m1() + p_d * no_light;
    let wrong_click = p_d * no_light;
    let num = e_d * (1.0 - p_d) * right_click + (1.0 - e_d) * (1.0 - p_d) * wrong_click;
    Ok(num / q)
}

/// Expected number of sifted key bits: `n_mu = (2/M) Q N (1-p_s)`.
pub fn expected_sifted(m_slices: u32, q_mu: f64, n_rounds: f64, p_s: f64) -> f64 {
    2.0 / m_slices as f64 * q_mu * n_rounds * (1.0 - p_s)
}

/// Expected number of sampled (test) bits: `(2/M) Q N p_s`.
pub fn expected_sampled(m_slices: u32, q_mu: f64, n_rounds: f64, p_s: f64) -> f64 {
    2.0 / m_slices as f64 * q_mu * n_rounds * p_s
}
