//! Finite-key analysis of phase-matching QKD without intensity modulation.
//!
//! The crate covers the whole path from physical parameters to a secret key
//! rate: photon-number weights of discretely randomized coherent states
//! ([`numerics`]), the symmetric lossy channel ([`channel`]), the finite-key
//! bound chain ([`security`]), a Monte Carlo emulation of the protocol
//! ([`simulator`]), rate maximization ([`optimizer`]) and the reproduction of
//! key rates from measured tallies ([`ingest`]).
//!
//! ```
//! use pmqkd::{analytic_key_rate, ChannelSpec, ProtocolParams};
//!
//! let channel = ChannelSpec::from_loss_db(40.0).unwrap();
//! let result = analytic_key_rate(&ProtocolParams::new(channel, 1.9e-3)).unwrap();
//! assert!(result.rate > 0.0);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod keyrate;
pub mod numerics;
pub mod optimizer;
pub mod params;
pub mod security;
pub mod simulator;
pub mod tally;

pub use channel::{ChannelSpec, Loss};
pub use error::{Error, ErrorCode, Result};
pub use ingest::{
    derive_observables, parse_tally_csv, parse_tally_str, reproduce_key_rate, write_tally_csv,
    CountsInterpretation, ExperimentRecord, ReproductionOptions,
};
pub use keyrate::{analytic_key_rate, analytic_rate, evaluate, KeyRateInputs, KeyRateResult, Mode};
pub use optimizer::{optimize, Bounds, OptimizationResult, OptimizerConfig, Strategy};
pub use params::ProtocolParams;
pub use security::{compose_epsilons, Conventions, SecurityBudget};
pub use simulator::simulate;
pub use tally::{tally_to_stats, ObservedTally, TallyStats};
