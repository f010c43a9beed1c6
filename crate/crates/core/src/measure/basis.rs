use serde::{Deserialize, Serialize};

use crate::linalg::{c, CMatrix, CVector, C64};
use crate::quantum::PureState;

/// An orthonormal qubit basis {|v₀⟩, |v₁⟩} with
/// |v₀⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩ and
/// |v₁⟩ = −e^{−iφ} sin(θ/2)|0⟩ + cos(θ/2)|1⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitBasis {
    pub theta: f64,
    pub phi: f64,
}

impl Default for QubitBasis {
    fn default() -> Self {
        Self::computational()
    }
}

impl QubitBasis {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn computational() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
        }
    }

    /// v₀ = |−⟩, v₁ = |+⟩: counting ones counts |+⟩ outcomes.
    pub fn counting_plus() -> Self {
        Self {
            theta: -std::f64::consts::FRAC_PI_2,
            phi: 0.0,
        }
    }

    /// v₀ = |+⟩, v₁ = −|−⟩.
    pub fn counting_minus() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
        }
    }

    pub fn vector(&self, j: usize) -> CVector {
        let (s, co) = (self.theta / 2.0).sin_cos();
        match j {
            0 => CVector::from_vec(vec![c(co, 0.0), C64::from_polar(s, self.phi)]),
            _ => CVector::from_vec(vec![-C64::from_polar(s, -self.phi), c(co, 0.0)]),
        }
    }

    pub fn state(&self, j: usize) -> PureState {
        PureState::from_parts_unchecked(self.vector(j), vec![2])
    }

    /// U with rows ⟨v₀| and ⟨v₁|, mapping |v_j⟩ to |j⟩.
    pub fn rotation(&self) -> CMatrix {
        let (v0, v1) = (self.vector(0), self.vector(1));
        CMatrix::from_fn(2, 2, |r, col| {
            if r == 0 {
                v0[col].conj()
            } else {
                v1[col].conj()
            }
        })
    }

    /// e₀|v₀⟩⟨v₀| + e₁|v₁⟩⟨v₁|.
    pub fn operator(&self, e0: f64, e1: f64) -> CMatrix {
        let (v0, v1) = (self.vector(0), self.vector(1));
        &v0 * v0.adjoint() * c(e0, 0.0) + &v1 * v1.adjoint() * c(e1, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn rotations_are_unitary_and_diagonalise() {
        for b in [
            QubitBasis::computational(),
            QubitBasis::counting_plus(),
            QubitBasis::new(1.1, -0.4),
        ] {
            let u = b.rotation();
            assert!(linalg::is_unitary(&u, 1e-12));
            let d = &u * b.operator(0.2, 0.7) * u.adjoint();
            assert!((d[(0, 0)].re - 0.2).abs() < 1e-12 && (d[(1, 1)].re - 0.7).abs() < 1e-12);
            assert!(d[(0, 1)].norm() < 1e-12);
        }
    }

    #[test]
    fn counting_plus_marks_plus() {
        let v1 = QubitBasis::counting_plus().state(1);
        assert!((v1.inner(&PureState::plus()).unwrap().norm() - 1.0).abs() < 1e-12);
    }
}
