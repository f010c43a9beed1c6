//! Exact simulation of gentle quantum measurements, quantum differential
//! privacy, and online shadow tomography by private multiplicative weights.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod harness;
pub mod learner;
pub mod linalg;
pub mod measure;
pub mod quantum;

pub use classical::{ClassicalMechanism, DiscreteLaplace, FiniteDistribution, ProductBernoulli};
pub use error::{Error, Result};
pub use harness::{list_experiments, run_experiment, ExperimentConfig, ExperimentReport};
pub use measure::{GentlenessProfile, NoisyCountMeasurement, Postprocess, QubitBasis};
pub use quantum::{DensityMatrix, PovmElement, PureState, QuantumOperation, State};
