//! The finite-key bound chain.
//!
//! sampled errors -> vacuum yield -> phase error (continuous, then
//! discrete-slice deviations) -> Kato correction -> key length.

mod budget;
mod chernoff;
mod kato;
mod key;
mod phase;
mod vacuum;

use serde::{Deserialize, Serialize};

pub use budget::{compose_epsilons, EpsilonSummary, SecurityBudget};
pub use chernoff::{
    chernoff_expected_ub, chernoff_expected_ub_beta, chernoff_observed_ub,
    chernoff_observed_ub_beta, LogBase,
};
pub use kato::{kato_correction, kato_tail, KatoCoefficients};
pub use key::{key_length, KeyLength};
pub use phase::{
    deviation_bound, phase_error_continuous, phase_error_discrete, phase_error_final,
    phase_error_terms, phase_error_with_kato, PhaseErrorBreakdown, SUPPORTED_SLICES,
};
pub use vacuum::{vacuum_yield_ub, VacuumNormalization, VacuumYieldBound};

/// Interpretation switches for places where the bound chain admits more than
/// one reading. The defaults are the sound choices; the alternatives exist
/// for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conventions {
    pub log_base: LogBase,
    pub vacuum_normalization: VacuumNormalization,
}
