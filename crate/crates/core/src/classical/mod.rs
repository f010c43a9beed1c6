//! Finite distributions, divergences, classical mechanisms, and exact DP checks.

mod audit;
mod distribution;
mod laplace;
mod mechanism;

pub use audit::{posterior_kl_audit, AuditPath, AuditReport, AuditRow, MAX_ENUMERATION_BITS};
pub use distribution::{
    bit, hamming_weight_distribution, hamming_weight_pmf, hellinger_sq, kl, total_variation,
    FiniteDistribution, ProductBernoulli,
};
pub use laplace::{DiscreteLaplace, DEFAULT_TAIL_MASS};
pub use mechanism::{
    bit_flip_neighbors, dp_epsilon, dp_epsilon_by_weight, epsilon_delta_quantile, marginal,
    posterior, ClassicalMechanism, OutputKernel, UntruncatedNoisyCount,
};
