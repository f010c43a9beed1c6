//! Exact finite-dimensional states, operations, and distances.

mod channel;
pub mod random;
mod state;

pub use channel::{
    apply_and_condition, apply_local_unitary, apply_operation, check_povm_complete,
    computational_diagonal, density_trace_distance, partial_trace, povm_probs, pure_trace_distance,
    trace_distance, PovmElement, QuantumOperation,
};
pub(crate) use channel::{apply_qubit_gate, apply_register_matrix};
pub use state::{tensor, DensityMatrix, PureState, State};
