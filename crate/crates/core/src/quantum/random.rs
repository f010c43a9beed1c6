//! Random states and operators for property tests and experiments.

use rand::Rng;
use rand_distr::StandardNormal;

use super::channel::{PovmElement, QuantumOperation};
use super::state::{DensityMatrix, PureState};
use crate::linalg::{self, c, CMatrix, CVector, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random pure state over `dims`.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>) -> PureState {
    let d: usize = dims.iter().product();
    let v = CVector::from_fn(d, |_, _| gaussian(rng));
    PureState::normalized(v, dims).expect("gaussian vector is nonzero")
}

/// Haar-random qubit state with real amplitudes.
pub fn real_qubit<R: Rng + ?Sized>(rng: &mut R) -> PureState {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    PureState::from_parts_unchecked(
        CVector::from_vec(vec![c(theta.cos(), 0.0), c(theta.sin(), 0.0)]),
        vec![2],
    )
}

/// Product of independent Haar qubits.
pub fn product_qubits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<PureState> {
    (0..n).map(|_| haar_state(rng, vec![2])).collect()
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase correction.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let qr = ginibre(rng, d, d).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CVector::from_fn(d, |i, _| {
        let x = r[(i, i)];
        if x.norm() > 0.0 {
            x / x.norm()
        } else {
            c(1.0, 0.0)
        }
    });
    q * CMatrix::from_diagonal(&phases)
}

/// Random full-rank density matrix from the Hilbert–Schmidt ensemble.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let g = ginibre(rng, d, d);
    DensityMatrix::from_unnormalized(&g * g.adjoint(), dims)
        .expect("Wishart matrix is PSD with positive trace")
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    linalg::hermitize(&ginibre(rng, d, d))
}

/// Random effect with spectrum drawn uniformly from [0, 1].
pub fn random_effect<R: Rng + ?Sized>(rng: &mut R, d: usize) -> PovmElement {
    let u = haar_unitary(rng, d);
    let diag = CVector::from_fn(d, |_, _| c(rng.random::<f64>(), 0.0));
    PovmElement::from_matrix_unchecked(linalg::hermitize(
        &(&u * CMatrix::from_diagonal(&diag) * u.adjoint()),
    ))
}

/// Random `k`-outcome POVM: E_i = S^{-1/2} G_i G_i† S^{-1/2} with S = Σ G_i G_i†.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Vec<PovmElement> {
    let parts: Vec<CMatrix> = (0..k)
        .map(|_| {
            let g = ginibre(rng, d, d);
            &g * g.adjoint()
        })
        .collect();
    let s = parts.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
    let inv_sqrt = linalg::hermitian_map(&s, |l| 1.0 / l.sqrt());
    parts
        .iter()
        .map(|p| {
            PovmElement::from_matrix_unchecked(linalg::hermitize(&(&inv_sqrt * p * &inv_sqrt)))
        })
        .collect()
}

/// Random quantum operation with `k` Kraus operators: blocks of a Haar
/// isometry, scaled by `scale` ∈ (0, 1] so that Σ B†B = scale²·I.
pub fn random_operation<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    k: usize,
    scale: f64,
) -> QuantumOperation {
    let u = haar_unitary(rng, d * k);
    let ops = (0..k)
        .map(|i| u.view((i * d, 0), (d, d)).into_owned() * c(scale, 0.0))
        .collect();
    QuantumOperation::from_kraus_unchecked(ops)
}

/// Random trace-non-increasing operation with a non-scalar effect: a random
/// channel followed by a random effect's square root.
pub fn random_filter<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> QuantumOperation {
    let channel = random_operation(rng, d, k, 1.0);
    let root = linalg::psd_sqrt(random_effect(rng, d).matrix());
    QuantumOperation::from_kraus_unchecked(vec![root])
        .after(&channel)
        .expect("dimensions agree")
}
