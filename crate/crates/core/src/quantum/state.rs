use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, re, CMatrix, CVector, C64, HERMITIAN_TOL, PSD_TOL};

const NORM_TOL: f64 = 1e-9;

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidState(format!(
            "register dims must be positive, got {dims:?}"
        )));
    }
    let prod: usize = dims.iter().product();
    if prod != len {
        return Err(Error::DimensionMismatch {
            expected: prod,
            got: len,
        });
    }
    Ok(())
}

/// A normalised vector over a tensor product of registers. Register 0 is the
/// leftmost Kronecker factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PureStateJson", into = "PureStateJson")]
pub struct PureState {
    amps: CVector,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(amps: CVector, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, amps.len())?;
        let norm = amps.norm_squared();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm {norm} is not 1")));
        }
        Ok(Self { amps, dims })
    }

    /// Normalises `amps` before validating.
    pub fn normalized(amps: CVector, dims: Vec<usize>) -> Result<Self> {
        let norm = amps.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        Self::new(amps.unscale(norm), dims)
    }

    pub fn from_amplitudes(amps: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        Self::new(CVector::from_vec(amps), dims)
    }

    /// Skips the norm check; callers guarantee normalisation.
    pub(crate) fn from_parts_unchecked(amps: CVector, dims: Vec<usize>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), amps.len());
        Self { amps, dims }
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let d: usize = dims.iter().product();
        if index >= d {
            return Err(invalid_index(index, d));
        }
        let mut amps = CVector::zeros(d);
        amps[index] = re(1.0);
        Self::new(amps, dims)
    }

    pub fn qubit(a: C64, b: C64) -> Result<Self> {
        Self::normalized(CVector::from_vec(vec![a, b]), vec![2])
    }

    /// Qubit with Bloch angles: cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
    pub fn qubit_bloch(theta: f64, phi: f64) -> Self {
        let (s, co) = (theta / 2.0).sin_cos();
        Self::from_parts_unchecked(
            CVector::from_vec(vec![re(co), C64::from_polar(s, phi)]),
            vec![2],
        )
    }

    pub fn zero() -> Self {
        Self::from_parts_unchecked(CVector::from_vec(vec![re(1.0), re(0.0)]), vec![2])
    }

    pub fn one() -> Self {
        Self::from_parts_unchecked(CVector::from_vec(vec![re(0.0), re(1.0)]), vec![2])
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_parts_unchecked(CVector::from_vec(vec![re(h), re(h)]), vec![2])
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_parts_unchecked(CVector::from_vec(vec![re(h), re(-h)]), vec![2])
    }

    /// (|00⟩ + |11⟩)/√2.
    pub fn bell() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_parts_unchecked(
            CVector::from_vec(vec![re(h), re(0.0), re(0.0), re(h)]),
            vec![2, 2],
        )
    }

    /// `n` copies of `self`, as one joint state.
    pub fn power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("tensor power of zero copies"));
        }
        let copies = vec![self.clone(); n];
        Self::tensor_all(&copies)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_registers(&self) -> usize {
        self.dims.len()
    }

    pub fn is_all_qubits(&self) -> bool {
        self.dims.iter().all(|&d| d == 2)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_parts_unchecked(linalg::outer(&self.amps), self.dims.clone())
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState::from_parts_unchecked(linalg::kron_vec(&self.amps, &other.amps), dims)
    }

    pub fn tensor_all(states: &[PureState]) -> Result<PureState> {
        let (first, rest) = states
            .split_first()
            .ok_or(Error::Empty("tensor of no states"))?;
        Ok(rest.iter().fold(first.clone(), |acc, s| acc.tensor(s)))
    }
}

fn invalid_index(index: usize, d: usize) -> Error {
    Error::InvalidArgument(format!(
        "basis index {index} out of range for dimension {d}"
    ))
}

/// A unit-trace positive semidefinite matrix over a tensor product of registers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityJson", into = "DensityJson")]
pub struct DensityMatrix {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        check_dims(&dims, matrix.nrows())?;
        if !linalg::is_hermitian(&matrix, HERMITIAN_TOL) {
            return Err(Error::InvalidState(
                "density matrix is not Hermitian".into(),
            ));
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = linalg::hermitian_eigenvalues(&matrix)
            .first()
            .copied()
            .unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min}")));
        }
        Ok(Self { matrix, dims })
    }

    /// Normalises a PSD matrix by its trace, then validates.
    pub fn from_unnormalized(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let tr = linalg::trace(&matrix).re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        Self::new(linalg::hermitize(&matrix).unscale(tr), dims)
    }

    pub(crate) fn from_parts_unchecked(matrix: CMatrix, dims: Vec<usize>) -> Self {
        Self { matrix, dims }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        Self::new(linalg::identity(d).unscale(d as f64), dims)
    }

    /// Diagonal (classical) state with the given probabilities.
    pub fn diagonal(probs: &[f64], dims: Vec<usize>) -> Result<Self> {
        let d = CVector::from_iterator(probs.len(), probs.iter().map(|&p| re(p)));
        Self::new(CMatrix::from_diagonal(&d), dims)
    }

    /// 2×2 state from Bloch coordinates (x, y, z) with |r| ≤ 1.
    pub fn qubit_bloch_vector(x: f64, y: f64, z: f64) -> Result<Self> {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                re((1.0 + z) / 2.0),
                c(x / 2.0, -y / 2.0),
                c(x / 2.0, y / 2.0),
                re((1.0 - z) / 2.0),
            ],
        );
        Self::new(m, vec![2])
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_registers(&self) -> usize {
        self.dims.len()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix::from_parts_unchecked(linalg::kron(&self.matrix, &other.matrix), dims)
    }

    pub fn tensor_all(states: &[DensityMatrix]) -> Result<DensityMatrix> {
        let (first, rest) = states
            .split_first()
            .ok_or(Error::Empty("tensor of no states"))?;
        Ok(rest.iter().fold(first.clone(), |acc, s| acc.tensor(s)))
    }
}

/// Either kind of state, for operations that accept both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum State {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(p) => p.dim(),
            State::Mixed(m) => m.dim(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            State::Pure(p) => p.dims(),
            State::Mixed(m) => m.dims(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(p) => p.to_density(),
            State::Mixed(m) => m.clone(),
        }
    }
}

impl From<PureState> for State {
    fn from(p: PureState) -> Self {
        State::Pure(p)
    }
}

impl From<DensityMatrix> for State {
    fn from(m: DensityMatrix) -> Self {
        State::Mixed(m)
    }
}

/// Kronecker product of states in argument order. All states must be of the
/// same kind.
pub fn tensor(states: &[State]) -> Result<State> {
    match states.first() {
        None => Err(Error::Empty("tensor of no states")),
        Some(State::Pure(_)) => {
            let pure = states
                .iter()
                .map(|s| match s {
                    State::Pure(p) => Ok(p.clone()),
                    State::Mixed(_) => Err(Error::MixedKinds),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(State::Pure(PureState::tensor_all(&pure)?))
        }
        Some(State::Mixed(_)) => {
            let mixed = states
                .iter()
                .map(|s| match s {
                    State::Mixed(m) => Ok(m.clone()),
                    State::Pure(_) => Err(Error::MixedKinds),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(State::Mixed(DensityMatrix::tensor_all(&mixed)?))
        }
    }
}

fn interleave<'a>(it: impl Iterator<Item = &'a C64>) -> Vec<f64> {
    it.flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(v: &[f64]) -> Result<Vec<C64>> {
    if !v.len().is_multiple_of(2) {
        return Err(Error::InvalidState(
            "interleaved re/im array has odd length".into(),
        ));
    }
    Ok(v.chunks(2).map(|p| c(p[0], p[1])).collect())
}

#[derive(Serialize, Deserialize)]
struct PureStateJson {
    dims: Vec<usize>,
    amplitudes: Vec<f64>,
}

impl From<PureState> for PureStateJson {
    fn from(s: PureState) -> Self {
        PureStateJson {
            amplitudes: interleave(s.amps.iter()),
            dims: s.dims,
        }
    }
}

impl TryFrom<PureStateJson> for PureState {
    type Error = Error;
    fn try_from(j: PureStateJson) -> Result<Self> {
        PureState::from_amplitudes(deinterleave(&j.amplitudes)?, j.dims)
    }
}

/// Row-major interleaved entries.
#[derive(Serialize, Deserialize)]
struct DensityJson {
    dims: Vec<usize>,
    matrix: Vec<f64>,
}

impl From<DensityMatrix> for DensityJson {
    fn from(s: DensityMatrix) -> Self {
        let d = s.dim();
        let rows: Vec<C64> = (0..d)
            .flat_map(|r| (0..d).map(move |col| (r, col)))
            .map(|(r, col)| s.matrix[(r, col)])
            .collect();
        DensityJson {
            matrix: interleave(rows.iter()),
            dims: s.dims,
        }
    }
}

impl TryFrom<DensityJson> for DensityMatrix {
    type Error = Error;
    fn try_from(j: DensityJson) -> Result<Self> {
        let entries = deinterleave(&j.matrix)?;
        let d = (entries.len() as f64).sqrt().round() as usize;
        if d * d != entries.len() {
            return Err(Error::InvalidState(
                "matrix entry count is not a square".into(),
            ));
        }
        DensityMatrix::new(CMatrix::from_row_slice(d, d, &entries), j.dims)
    }
}
