//! Concrete measurements with exact post-measurement states, gentleness
//! profiles, and the DP/gentleness/triviality bound calculators.

mod basis;
mod bounds;
mod compose;
mod count;
mod examples;
mod instrument;

pub use basis::QubitBasis;
pub use bounds::{
    canonical_gentle_implementation, compose_dp, dp_to_gentle, dp_to_trivial, gentle_to_dp,
    trivial_to_gentle, triviality_epsilon, triviality_transfer, Bound, TRIVIALITY_FLOOR,
};
pub use compose::{ComposeFailure, ComposeTrial};
pub use count::{
    noisy_count_measure, noisy_count_outcome_dist, threshold_fires, CountKernel,
    NoisyCountMeasurement, Postprocess, MIN_OUTCOME_PROB,
};
pub use examples::{
    bell_projection_measurement, noisy_parity_measurement, pair_basis_rotation,
    randomized_response, rebit_witness, rebit_witness_effect, BellProjection, NoisyParity,
    RandomizedResponse, BELL_MAX_QUBITS,
};
pub use instrument::{
    gentleness_profile, outcome_damage, GentlenessProfile, Instrument, KrausInstrument,
    OutcomeDamage, OutcomeSelection,
};
