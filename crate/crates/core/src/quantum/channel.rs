use super::state::{DensityMatrix, PureState, State};
use crate::classical::FiniteDistribution;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, COMPLETENESS_TOL, HERMITIAN_TOL, PSD_TOL};

/// A measurement effect 0 ⪯ E ⪯ I.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmElement {
    matrix: CMatrix,
}

impl PovmElement {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidOperator("effect must be square".into()));
        }
        if !linalg::is_hermitian(&matrix, HERMITIAN_TOL) {
            return Err(Error::InvalidOperator("effect is not Hermitian".into()));
        }
        let eig = linalg::hermitian_eigenvalues(&matrix);
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        if lo < -PSD_TOL || hi > 1.0 + PSD_TOL {
            return Err(Error::InvalidOperator(format!(
                "effect spectrum [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    /// Projector onto a pure state.
    pub fn projector(psi: &PureState) -> Self {
        Self {
            matrix: linalg::outer(psi.amplitudes()),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    /// Tr(Eρ).
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        if self.dim() != rho.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rho.dim(),
            });
        }
        Ok(linalg::trace(&(&self.matrix * rho.matrix())).re)
    }

    /// ⟨ψ|E|ψ⟩.
    pub fn expectation_pure(&self, psi: &PureState) -> Result<f64> {
        if self.dim() != psi.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.dim(),
            });
        }
        Ok(psi.amplitudes().dotc(&(&self.matrix * psi.amplitudes())).re)
    }
}

/// A trace-non-increasing completely positive map given by Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOperation {
    kraus_ops: Vec<CMatrix>,
}

impl QuantumOperation {
    pub fn new(kraus_ops: Vec<CMatrix>) -> Result<Self> {
        let first = kraus_ops
            .first()
            .ok_or(Error::Empty("operation with no Kraus operators"))?;
        let shape = first.shape();
        if kraus_ops.iter().any(|b| b.shape() != shape) {
            return Err(Error::InvalidOperator(
                "Kraus operators have differing shapes".into(),
            ));
        }
        let sum = Self::effect_sum(&kraus_ops);
        let top = linalg::hermitian_eigenvalues(&sum)
            .last()
            .copied()
            .unwrap_or(0.0);
        if top > 1.0 + COMPLETENESS_TOL {
            return Err(Error::InvalidOperator(format!(
                "Σ B†B has eigenvalue {top} > 1"
            )));
        }
        Ok(Self { kraus_ops })
    }

    pub(crate) fn from_kraus_unchecked(kraus_ops: Vec<CMatrix>) -> Self {
        Self { kraus_ops }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            kraus_ops: vec![linalg::identity(d)],
        }
    }

    pub fn kraus_ops(&self) -> &[CMatrix] {
        &self.kraus_ops
    }

    pub fn input_dim(&self) -> usize {
        self.kraus_ops[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.kraus_ops[0].nrows()
    }

    fn effect_sum(ops: &[CMatrix]) -> CMatrix {
        let d = ops[0].ncols();
        ops.iter()
            .fold(CMatrix::zeros(d, d), |acc, b| acc + b.adjoint() * b)
    }

    /// The effect Σ B_i†B_i whose expectation is the acceptance probability.
    pub fn effect(&self) -> PovmElement {
        PovmElement::from_matrix_unchecked(linalg::hermitize(&Self::effect_sum(&self.kraus_ops)))
    }

    /// Σ B_i M B_i† for an arbitrary square matrix M.
    pub fn apply_matrix(&self, m: &CMatrix) -> Result<CMatrix> {
        if m.nrows() != self.input_dim() || !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: m.nrows(),
            });
        }
        let d = self.output_dim();
        Ok(self
            .kraus_ops
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, b| acc + b * m * b.adjoint()))
    }

    /// Composition `self ∘ first` (apply `first`, then `self`).
    pub fn after(&self, first: &QuantumOperation) -> Result<QuantumOperation> {
        if self.input_dim() != first.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: first.output_dim(),
            });
        }
        let ops = self
            .kraus_ops
            .iter()
            .flat_map(|a| first.kraus_ops.iter().map(move |b| a * b))
            .collect();
        Ok(Self { kraus_ops: ops })
    }
}

/// Returns (Σ B_i ρ B_i†, its trace).
pub fn apply_operation(op: &QuantumOperation, rho: &DensityMatrix) -> Result<(CMatrix, f64)> {
    let out = op.apply_matrix(rho.matrix())?;
    let p = linalg::trace(&out).re;
    Ok((out, p))
}

/// Applies `op` and conditions on acceptance.
pub fn apply_and_condition(
    op: &QuantumOperation,
    rho: &DensityMatrix,
) -> Result<(DensityMatrix, f64)> {
    let (out, p) = apply_operation(op, rho)?;
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(
            "operation accepts with probability zero".into(),
        ));
    }
    let dims = if op.output_dim() == rho.dim() {
        rho.dims().to_vec()
    } else {
        vec![op.output_dim()]
    };
    Ok((
        DensityMatrix::from_parts_unchecked(linalg::hermitize(&out).unscale(p), dims),
        p,
    ))
}

/// Half the trace norm of the difference.
pub fn trace_distance(a: &State, b: &State) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(match (a, b) {
        (State::Pure(p), State::Pure(q)) => pure_trace_distance(p, q)?,
        _ => density_trace_distance(&a.to_density(), &b.to_density())?,
    })
}

/// √(1 − |⟨ψ|φ⟩|²).
pub fn pure_trace_distance(a: &PureState, b: &PureState) -> Result<f64> {
    let ov = a.inner(b)?.norm_sqr();
    Ok((1.0 - ov).max(0.0).sqrt())
}

pub fn density_trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(0.5 * linalg::trace_norm(&(a.matrix() - b.matrix())))
}

/// Reduced state on the registers in `keep`, in increasing register order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    let r = dims.len();
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if let Some(&bad) = keep_sorted.iter().find(|&&k| k >= r) {
        return Err(Error::BadRegister {
            index: bad,
            registers: r,
        });
    }
    if keep_sorted.is_empty() {
        return Err(Error::Empty("partial trace keeping no registers"));
    }
    if keep_sorted.len() == r {
        return Ok(rho.clone());
    }
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..r).filter(|k| !keep_sorted.contains(k)).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced.iter().map(|&k| dims[k]).product();

    let strides = register_strides(dims);
    let split = |kept_idx: usize, traced_idx: usize| -> usize {
        let mut full = 0;
        let mut rem = kept_idx;
        for (pos, &reg) in keep_sorted.iter().enumerate().rev() {
            full += (rem % kept_dims[pos]) * strides[reg];
            rem /= kept_dims[pos];
        }
        let mut rem = traced_idx;
        for &reg in traced.iter().rev() {
            full += (rem % dims[reg]) * strides[reg];
            rem /= dims[reg];
        }
        full
    };
    let m = rho.matrix();
    let out = CMatrix::from_fn(dk, dk, |i, j| {
        (0..dt).map(|t| m[(split(i, t), split(j, t))]).sum::<C64>()
    });
    Ok(DensityMatrix::from_parts_unchecked(out, kept_dims))
}

/// Row-major strides: register `k`'s digit has weight Π_{j>k} d_j.
pub(crate) fn register_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// Applies `u` to one register of a pure state.
pub fn apply_local_unitary(psi: &PureState, register: usize, u: &CMatrix) -> Result<PureState> {
    let dims = psi.dims();
    if register >= dims.len() {
        return Err(Error::BadRegister {
            index: register,
            registers: dims.len(),
        });
    }
    if u.nrows() != dims[register] || !u.is_square() {
        return Err(Error::DimensionMismatch {
            expected: dims[register],
            got: u.nrows(),
        });
    }
    if !linalg::is_unitary(u, HERMITIAN_TOL) {
        return Err(Error::InvalidOperator("matrix is not unitary".into()));
    }
    let mut amps = psi.amplitudes().clone();
    apply_register_matrix(amps.as_mut_slice(), dims, register, u);
    Ok(PureState::from_parts_unchecked(amps, dims.to_vec()))
}

/// In-place `u` on register `register` of an amplitude buffer. No checks.
pub(crate) fn apply_register_matrix(
    amps: &mut [C64],
    dims: &[usize],
    register: usize,
    u: &CMatrix,
) {
    let d = dims[register];
    let stride: usize = dims[register + 1..].iter().product();
    let block = stride * d;
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for base in (0..amps.len()).step_by(block) {
        for off in 0..stride {
            for (a, b) in buf.iter_mut().enumerate() {
                *b = amps[base + off + a * stride];
            }
            for r in 0..d {
                amps[base + off + r * stride] = (0..d).map(|col| u[(r, col)] * buf[col]).sum();
            }
        }
    }
}

/// Fast path of [`apply_register_matrix`] for a qubit register.
pub(crate) fn apply_qubit_gate(amps: &mut [C64], num_qubits: usize, qubit: usize, u: &CMatrix) {
    let stride = 1usize << (num_qubits - 1 - qubit);
    let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    for base in (0..amps.len()).step_by(2 * stride) {
        for i in base..base + stride {
            let (a, b) = (amps[i], amps[i + stride]);
            amps[i] = u00 * a + u01 * b;
            amps[i + stride] = u10 * a + u11 * b;
        }
    }
}

/// Checks Σ E_i = I.
pub fn check_povm_complete(povm: &[PovmElement]) -> Result<()> {
    let first = povm.first().ok_or(Error::Empty("POVM with no elements"))?;
    let d = first.dim();
    if povm.iter().any(|e| e.dim() != d) {
        return Err(Error::InvalidOperator(
            "POVM elements have differing dimensions".into(),
        ));
    }
    let sum = povm
        .iter()
        .fold(CMatrix::zeros(d, d), |acc, e| acc + e.matrix());
    let dev = linalg::max_abs_entry(&(sum - linalg::identity(d)));
    if dev > COMPLETENESS_TOL {
        return Err(Error::InvalidOperator(format!(
            "POVM elements sum to I only within {dev}"
        )));
    }
    Ok(())
}

/// Outcome distribution Tr(E_i ρ), labelled by element index.
pub fn povm_probs(povm: &[PovmElement], rho: &DensityMatrix) -> Result<FiniteDistribution> {
    check_povm_complete(povm)?;
    let probs = povm
        .iter()
        .map(|e| e.expectation(rho).map(|p| p.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    FiniteDistribution::normalized((0..probs.len() as i64).collect(), probs)
}

/// Diagonal of ρ in the computational basis.
pub fn computational_diagonal(rho: &DensityMatrix) -> CVector {
    rho.matrix().diagonal()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gates, re};

    fn diag2(a: f64, b: f64) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(vec![re(a), re(b)]))
    }

    #[test]
    fn trace_distance_examples() {
        let zero: State = PureState::zero().into();
        let one: State = PureState::one().into();
        let plus: State = PureState::plus().into();
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-12);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
        assert!(
            (trace_distance(&zero, &plus).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7
        );
        let mixed = State::Mixed(PureState::zero().to_density());
        let mplus = State::Mixed(PureState::plus().to_density());
        assert!(
            (trace_distance(&mixed, &mplus).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs()
                < 1e-9
        );
        let big: State = PureState::bell().into();
        assert!(trace_distance(&zero, &big).is_err());
    }

    #[test]
    fn apply_operation_examples() {
        let rho = PureState::plus().to_density();
        let (out, p) = apply_operation(&QuantumOperation::identity(2), &rho).unwrap();
        assert!((p - 1.0).abs() < 1e-12 && linalg::max_abs_entry(&(out - rho.matrix())) < 1e-12);

        let proj = QuantumOperation::new(vec![diag2(1.0, 0.0)]).unwrap();
        let (post, p) = apply_and_condition(&proj, &rho).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((post.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);

        let readout = QuantumOperation::new(vec![diag2(1.0, 0.0), diag2(0.0, 1.0)]).unwrap();
        for p0 in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let rho = DensityMatrix::diagonal(&[p0, 1.0 - p0], vec![2]).unwrap();
            let (out, p) = apply_operation(&readout, &rho).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
            assert!(linalg::max_abs_entry(&(out - rho.matrix())) < 1e-12);
        }
    }

    #[test]
    fn operation_validation() {
        assert!(QuantumOperation::new(vec![diag2(1.0, 0.0), diag2(1.0, 0.0)]).is_err());
        assert!(QuantumOperation::new(vec![]).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let a = DensityMatrix::qubit_bloch_vector(0.2, 0.1, -0.4).unwrap();
        let b = DensityMatrix::maximally_mixed(vec![3]).unwrap();
        let ab = a.tensor(&b);
        let ra = partial_trace(&ab, &[0]).unwrap();
        assert!(linalg::max_abs_entry(&(ra.matrix() - a.matrix())) < 1e-12);
        let rb = partial_trace(&ab, &[1]).unwrap();
        assert!(linalg::max_abs_entry(&(rb.matrix() - b.matrix())) < 1e-12);

        let bell = PureState::bell().to_density();
        let r = partial_trace(&bell, &[1]).unwrap();
        assert!(linalg::max_abs_entry(&(r.matrix() - linalg::identity(2).unscale(2.0))) < 1e-12);
        let all = partial_trace(&bell, &[0, 1]).unwrap();
        assert_eq!(all, bell);
        assert!(matches!(
            partial_trace(&bell, &[2]),
            Err(Error::BadRegister { .. })
        ));
    }

    #[test]
    fn partial_trace_middle_register() {
        let a = DensityMatrix::qubit_bloch_vector(0.0, 0.0, 1.0).unwrap();
        let b = DensityMatrix::qubit_bloch_vector(0.5, 0.0, 0.0).unwrap();
        let c = DensityMatrix::qubit_bloch_vector(0.0, 0.3, 0.3).unwrap();
        let abc = DensityMatrix::tensor_all(&[a.clone(), b, c.clone()]).unwrap();
        let ac = partial_trace(&abc, &[2, 0]).unwrap();
        assert!(linalg::max_abs_entry(&(ac.matrix() - a.tensor(&c).matrix())) < 1e-12);
    }

    #[test]
    fn local_unitary_examples() {
        let plus = apply_local_unitary(&PureState::zero(), 0, &gates::hadamard()).unwrap();
        assert!(pure_trace_distance(&plus, &PureState::plus()).unwrap() < 1e-7);
        let zz = PureState::zero().tensor(&PureState::zero());
        let z1 = apply_local_unitary(&zz, 1, &gates::pauli_x()).unwrap();
        assert!((z1.amplitudes()[1].re - 1.0).abs() < 1e-15);
        let u = gates::hadamard() * gates::pauli_y();
        let psi = PureState::qubit_bloch(0.3, 0.9).tensor(&PureState::qubit_bloch(2.0, -1.0));
        let back = apply_local_unitary(&apply_local_unitary(&psi, 1, &u).unwrap(), 1, &u.adjoint())
            .unwrap();
        assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-12);
        assert!(apply_local_unitary(&psi, 0, &diag2(1.0, 0.5)).is_err());
    }

    #[test]
    fn qubit_gate_matches_general_path() {
        let psi = PureState::tensor_all(&[
            PureState::qubit_bloch(0.3, 0.9),
            PureState::plus(),
            PureState::qubit_bloch(2.0, -1.0),
        ])
        .unwrap();
        let u = gates::hadamard() * gates::pauli_y();
        for q in 0..3 {
            let mut a = psi.amplitudes().clone();
            let mut b = psi.amplitudes().clone();
            apply_qubit_gate(a.as_mut_slice(), 3, q, &u);
            apply_register_matrix(b.as_mut_slice(), psi.dims(), q, &u);
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn povm_examples() {
        let comp = [
            PovmElement::new(diag2(1.0, 0.0)).unwrap(),
            PovmElement::new(diag2(0.0, 1.0)).unwrap(),
        ];
        let d = povm_probs(&comp, &PureState::plus().to_density()).unwrap();
        assert!((d.probs()[0] - 0.5).abs() < 1e-12 && (d.probs()[1] - 0.5).abs() < 1e-12);
        let half = PovmElement::new(diag2(0.5, 0.5)).unwrap();
        let rho = DensityMatrix::qubit_bloch_vector(0.3, 0.3, 0.3).unwrap();
        let d = povm_probs(&[half.clone(), half.clone()], &rho).unwrap();
        assert!((d.probs()[0] - 0.5).abs() < 1e-12);
        assert!(povm_probs(&[half], &rho).is_err());
        assert!(PovmElement::new(diag2(1.5, 0.0)).is_err());
    }
}
