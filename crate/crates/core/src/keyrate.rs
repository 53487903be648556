//! End-to-end key-rate evaluation.
//!
//! Both modes funnel into [`evaluate`]: simulation mode derives `Q`, `E_b`,
//! `n_mu` and the sampled error count from the channel model, reproduction
//! mode takes them from measured counts.

use serde::{Deserialize, Serialize};

use crate::channel::{self, expected_sampled, expected_sifted};
use crate::error::{Error, Result};
use crate::params::ProtocolParams;
use crate::security::{
    compose_epsilons, key_length, phase_error_discrete, phase_error_final, vacuum_yield_ub,
    Conventions, EpsilonSummary, KatoCoefficients, PhaseErrorBreakdown, SecurityBudget,
    VacuumYieldBound,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulation,
    Reproduction,
}

/// Observables feeding the bound chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateInputs {
    pub n_rounds: f64,
    pub mu: f64,
    pub m_slices: u32,
    pub p_s: f64,
    pub f_ec: f64,
    pub q_mu: f64,
    pub e_b: f64,
    pub n_mu: f64,
    pub m_s: f64,
    pub budget: SecurityBudget,
    pub conventions: Conventions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub mode: Mode,
    pub n_rounds: f64,
    pub mu: f64,
    pub m_slices: u32,
    pub p_s: f64,
    pub f_ec: f64,
    pub q_mu: f64,
    pub e_b: f64,
    pub n_mu: f64,
    pub m_s: f64,
    pub m_s_reconstructed: bool,
    pub vacuum: VacuumYieldBound,
    pub phase: PhaseErrorBreakdown,
    /// Absent when the sifted key is too small for the Kato bound.
    pub kato: Option<KatoCoefficients>,
    pub bracket: f64,
    pub ell: f64,
    pub rate: f64,
    pub budget: SecurityBudget,
    pub epsilons: EpsilonSummary,
    pub conventions: Conventions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Runs vacuum bound -> discrete phase error -> Kato -> key length.
pub fn evaluate(inputs: &KeyRateInputs, mode: Mode) -> Result<KeyRateResult> {
    let KeyRateInputs {
        n_rounds,
        mu,
        m_slices,
        p_s,
        f_ec,
        q_mu,
        e_b,
        n_mu,
        m_s,
        budget,
        conventions,
    } = *inputs;
    if !(q_mu > 0.0) {
        return Err(Error::UndefinedRate(format!("gain Q_mu = {q_mu} is not positive")));
    }

    let vacuum = vacuum_yield_ub(m_s, p_s, n_rounds, mu, budget.eps, m_slices, &conventions)?;
    let mut phase = phase_error_discrete(mu, m_slices, q_mu, vacuum.y0_bar)?;
    let mut notes = Vec::new();

    let kato = if n_mu >= 1.0 {
        let (ep_m_bar, kato) = phase_error_final(n_mu, phase.ep_m, budget.eps_ka)?;
        phase.ep_m_bar = ep_m_bar;
        phase.kato_delta = ep_m_bar - phase.ep_m;
        Some(kato)
    } else {
        notes.push(format!("sifted key n_mu = {n_mu:.3e} is below one bit; no key"));
        None
    };

    let key = key_length(n_mu.max(0.0), phase.ep_m_bar, e_b, f_ec, &budget, n_rounds)?;
    let (ell, rate) = if kato.is_some() { (key.ell, key.rate) } else { (0.0, 0.0) };

    Ok(KeyRateResult {
        mode,
        n_rounds,
        mu,
        m_slices,
        p_s,
        f_ec,
        q_mu,
        e_b,
        n_mu,
        m_s,
        m_s_reconstructed: false,
        vacuum,
        phase,
        kato,
        bracket: key.bracket,
        ell,
        rate,
        budget,
        epsilons: compose_epsilons(&budget),
        conventions,
        notes,
    })
}

/// Expected observables of the closed-form channel model.
pub fn analytic_inputs(params: &ProtocolParams) -> Result<KeyRateInputs> {
    params.validate()?;
    let ch = &params.channel;
    let eta = channel::transmittance(ch);
    let q_mu = channel::gain(params.mu, eta, ch.p_d);
    let e_b = channel::qber(params.mu, eta, ch.p_d, ch.e_d)?;
    let n_mu = expected_sifted(params.m_slices, q_mu, params.n_rounds, params.p_s);
    let n_s = expected_sampled(params.m_slices, q_mu, params.n_rounds, params.p_s);
    Ok(KeyRateInputs {
        n_rounds: params.n_rounds,
        mu: params.mu,
        m_slices: params.m_slices,
        p_s: params.p_s,
        f_ec: params.f_ec,
        q_mu,
        e_b,
        n_mu,
        m_s: e_b * n_s,
        budget: params.budget,
        conventions: params.conventions,
    })
}

/// Key rate predicted by the closed-form channel model.
pub fn analytic_key_rate(params: &ProtocolParams) -> Result<KeyRateResult> {
    evaluate(&analytic_inputs(params)?, Mode::Simulation)
}

/// Rate only; infeasible points (no gain) score zero. Used by the optimizer.
pub fn analytic_rate(params: &ProtocolParams) -> f64 {
    match analytic_key_rate(params) {
        Ok(r) => r.rate,
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSpec;

    fn params(loss_db: f64, mu: f64) -> ProtocolParams {
        ProtocolParams::new(ChannelSpec::from_loss_db(loss_db).unwrap(), mu)
    }

    #[test]
    fn no_light_no_key() {
        let r = analytic_key_rate(&params(20.0, 0.0)).unwrap();
        assert_eq!(r.rate, 0.0);
        assert!((r.e_b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn positive_rate_at_moderate_loss() {
        let r = analytic_key_rate(&params(30.0, 5e-3)).unwrap();
        assert!(r.rate > 1e-6, "{}", r.rate);
        assert!(r.ell <= r.n_mu);
        assert!(r.phase.ep_m_bar >= r.phase.ep_m);
    }

    #[test]
    fn zero_gain_is_an_error() {
        let mut p = params(20.0, 0.0);
        p.channel.p_d = 0.0;
        assert!(matches!(analytic_key_rate(&p), Err(Error::UndefinedRate(_))));
        assert_eq!(analytic_rate(&p), 0.0);
    }

    #[test]
    fn json_carries_budget_and_bounds() {
        let r = analytic_key_rate(&params(45.0, 9.78e-4)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["budget", "epsilons", "vacuum", "phase", "kato", "conventions"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["phase"]["deviations"].as_array().unwrap().len() == 4);
    }
}
