//! Monte Carlo emulation of preparation, measurement, sifting and sampling.
//!
//! Rounds are processed in fixed-size batches. Batch `i` draws from the
//! ChaCha8 stream `i` keyed by the run seed, so the tally depends only on
//! `(params, seed)` and never on how batches are spread over threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::transmittance;
use crate::error::{Error, Result};
use crate::params::ProtocolParams;
use crate::tally::{ObservedTally, SimDiagnostics};

pub use crate::tally::{tally_to_stats, MatchedRow, TallyStats};

/// Rounds per RNG stream.
pub const BATCH_ROUNDS: u64 = 1 << 16;

/// Outcome probabilities for one phase difference.
#[derive(Debug, Clone, Copy)]
struct ClickTable {
    d1_only: f64,
    single: f64,
    any: f64,
}

fn click_tables(params: &ProtocolParams) -> Vec<ClickTable> {
    let m = params.m_slices;
    let p_d = params.channel.p_d;
    let signal = params.mu * transmittance(&params.channel);
    (0..m)
        .map(|d| {
            let dphi = 2.0 * std::f64::consts::PI * d as f64 / m as f64;
            let s1 = signal * (1.0 + dphi.cos()) / 2.0;
            let s2 = (signal - s1).max(0.0);
            let silent1 = (1.0 - p_d) * (-s1).exp();
            let silent2 = (1.0 - p_d) * (-s2).exp();
            let d1_only = (1.0 - silent1) * silent2;
            let d2_only = (1.0 - silent2) * silent1;
            let both = (1.0 - silent1) * (1.0 - silent2);
            ClickTable {
                d1_only,
                single: d1_only + d2_only,
                any: d1_only + d2_only + both,
            }
        })
        .collect()
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn run_batch(
    params: &ProtocolParams,
    tables: &[ClickTable],
    seed: u64,
    batch: u64,
    rounds: u64,
) -> ObservedTally {
    let m = params.m_slices;
    let half = m / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);

    let mut tally = ObservedTally::empty(m);
    let mut diag = SimDiagnostics::default();
    let mut m_s = 0u64;
    let mut n_sifted = 0u64;

    for _ in 0..rounds {
        let theta_a = rng.random_range(0..m);
        let theta_b = rng.random_range(0..m);
        let bits = rng.next_u32();
        let (r_a, r_b) = (bits & 1, (bits >> 1) & 1);
        let phi_a = (theta_a + r_a * half) % m;
        let phi_b = (theta_b + r_b * half) % m;
        let dphi = (phi_a + m - phi_b) % m;

        let table = tables[dphi as usize];
        let u = uniform(&mut rng);
        if u >= table.single {
            if u < table.any {
                diag.double_clicks += 1;
            }
            continue;
        }
        tally.n_det += 1;

        let dtheta = (theta_a + m - theta_b) % m;
        if dtheta != 0 && dtheta != half {
            continue;
        }
        let mut d1 = u < table.d1_only;
        if uniform(&mut rng) < params.channel.e_d {
            d1 = !d1;
        }
        let row = tally.row_mut(phi_a, phi_b).expect("sifted pair has a row");
        if d1 {
            row.d1 += 1;
        } else {
            row.d2 += 1;
        }

        let flip = if dtheta == 0 { !d1 } else { d1 };
        let bob = r_b ^ flip as u32;
        let error = bob != r_a;
        diag.bit_errors += error as u64;

        if uniform(&mut rng) < params.p_s {
            m_s += error as u64;
        } else {
            n_sifted += 1;
        }
    }

    tally.n_rounds = rounds;
    tally.m_s = Some(m_s);
    tally.n_sifted = Some(n_sifted);
    tally.diagnostics = Some(diag);
    tally
}

/// Simulates `params.n_rounds` rounds.
///
/// `mu = 0` with `p_d = 0` produces an all-zero tally.
pub fn simulate(params: &ProtocolParams, seed: u64) -> Result<ObservedTally> {
    params.validate()?;
    if params.n_rounds > (1u64 << 53) as f64 || params.n_rounds.fract() != 0.0 {
        return Err(Error::usage(
            "n_rounds",
            format!("{} is not a whole number of simulable rounds", params.n_rounds),
        ));
    }
    let n_rounds = params.n_rounds as u64;
    let tables = click_tables(params);
    let n_batches = n_rounds.div_ceil(BATCH_ROUNDS);

    let mut seed_tally = ObservedTally::empty(params.m_slices);
    seed_tally.m_s = Some(0);
    seed_tally.n_sifted = Some(0);
    seed_tally.diagnostics = Some(SimDiagnostics::default());

    let tally = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let rounds = BATCH_ROUNDS.min(n_rounds - b * BATCH_ROUNDS);
            run_batch(params, &tables, seed, b, rounds)
        })
        .reduce(|| seed_tally.clone(), |acc, t| acc.merge(&t));
    Ok(tally)
}
