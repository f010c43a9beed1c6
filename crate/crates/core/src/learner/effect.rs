use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::measure::QubitBasis;
use crate::quantum::{DensityMatrix, PovmElement};

fn projective() -> [f64; 2] {
    [0.0, 1.0]
}

/// A qubit effect e₀|v₀⟩⟨v₀| + e₁|v₁⟩⟨v₁| in the basis given by (θ, φ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitEffect {
    pub theta: f64,
    pub phi: f64,
    #[serde(default = "projective")]
    pub eigenvalues: [f64; 2],
}

impl QubitEffect {
    pub fn new(theta: f64, phi: f64, eigenvalues: [f64; 2]) -> Result<Self> {
        if eigenvalues.iter().any(|e| !(0.0..=1.0).contains(e))
            || !theta.is_finite()
            || !phi.is_finite()
        {
            return Err(invalid_arg(format!(
                "not a qubit effect: θ={theta}, φ={phi}, eigenvalues {eigenvalues:?}"
            )));
        }
        Ok(Self {
            theta,
            phi,
            eigenvalues,
        })
    }

    /// Projector onto |v₁⟩.
    pub fn projective(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi,
            eigenvalues: projective(),
        }
    }

    /// Projector onto a uniformly random direction of the Bloch sphere.
    pub fn random_projective<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = rng.random_range(-1.0..=1.0);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        Self::projective(u.acos(), phi)
    }

    pub fn basis(&self) -> QubitBasis {
        QubitBasis::new(self.theta, self.phi)
    }

    pub fn element(&self) -> PovmElement {
        PovmElement::from_matrix_unchecked(
            self.basis()
                .operator(self.eigenvalues[0], self.eigenvalues[1]),
        )
    }

    pub fn value(&self, rho: &DensityMatrix) -> Result<f64> {
        self.element().expectation(rho)
    }
}

pub fn random_projective_stream<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<QubitEffect> {
    (0..m)
        .map(|_| QubitEffect::random_projective(rng))
        .collect()
}

/// Parses a JSON list of `{"theta", "phi", "eigenvalues"}` records.
pub fn load_stream(json: &str) -> Result<Vec<QubitEffect>> {
    let raw: Vec<QubitEffect> = serde_json::from_str(json)?;
    raw.into_iter()
        .map(|e| QubitEffect::new(e.theta, e.phi, e.eigenvalues))
        .collect()
}
