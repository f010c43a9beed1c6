use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::basis::QubitBasis;
use crate::classical::{hamming_weight_pmf, DiscreteLaplace, FiniteDistribution, OutputKernel};
use crate::error::{invalid_arg, Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::quantum::{apply_qubit_gate, DensityMatrix, PureState, State};

/// Outcomes below this probability are treated as impossible.
pub const MIN_OUTCOME_PROB: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Postprocess {
    /// Report the noisy count y ∈ [−C, n+C].
    RawCount,
    /// Report 1 iff |y/n − center| > half_width, else 0.
    Threshold { center: f64, half_width: f64 },
}

/// Per-register basis rotation, then count the |v₁⟩ outcomes on the counted
/// registers, add discrete Laplace noise, and post-process.
///
/// With `accept = [e₀, e₁]` each register in |v_j⟩ contributes a one with
/// probability e_j instead of deterministically, which realises the count of
/// accepts for the effect e₀|v₀⟩⟨v₀| + e₁|v₁⟩⟨v₁|.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CountSpec", into = "CountSpec")]
pub struct NoisyCountMeasurement {
    bases: Vec<QubitBasis>,
    counted: Vec<bool>,
    accept: [f64; 2],
    noise: DiscreteLaplace,
    postprocess: Postprocess,
    kernel: CountKernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CountSpec {
    bases: Vec<QubitBasis>,
    #[serde(default)]
    counted: Option<Vec<bool>>,
    #[serde(default = "default_accept")]
    accept: [f64; 2],
    noise: DiscreteLaplace,
    postprocess: Postprocess,
}

fn default_accept() -> [f64; 2] {
    [0.0, 1.0]
}

impl From<NoisyCountMeasurement> for CountSpec {
    fn from(m: NoisyCountMeasurement) -> Self {
        CountSpec {
            bases: m.bases,
            counted: Some(m.counted),
            accept: m.accept,
            noise: m.noise,
            postprocess: m.postprocess,
        }
    }
}

impl TryFrom<CountSpec> for NoisyCountMeasurement {
    type Error = Error;
    fn try_from(s: CountSpec) -> Result<Self> {
        let counted = s.counted.unwrap_or_else(|| vec![true; s.bases.len()]);
        Self::build(s.bases, counted, s.accept, s.noise, s.postprocess)
    }
}

impl NoisyCountMeasurement {
    pub fn new(
        bases: Vec<QubitBasis>,
        noise: DiscreteLaplace,
        postprocess: Postprocess,
    ) -> Result<Self> {
        let n = bases.len();
        Self::build(bases, vec![true; n], default_accept(), noise, postprocess)
    }

    /// L_σ: computational-basis Hamming weight plus noise of scale σ.
    pub fn lsigma(n: usize, sigma: f64) -> Result<Self> {
        Self::new(
            vec![QubitBasis::computational(); n],
            DiscreteLaplace::new(sigma)?,
            Postprocess::RawCount,
        )
    }

    /// Same basis on all `n` registers.
    pub fn uniform(
        n: usize,
        basis: QubitBasis,
        noise: DiscreteLaplace,
        postprocess: Postprocess,
    ) -> Result<Self> {
        Self::new(vec![basis; n], noise, postprocess)
    }

    pub fn with_counted(self, counted: Vec<bool>) -> Result<Self> {
        Self::build(
            self.bases,
            counted,
            self.accept,
            self.noise,
            self.postprocess,
        )
    }

    pub fn with_accept(self, e0: f64, e1: f64) -> Result<Self> {
        Self::build(
            self.bases,
            self.counted,
            [e0, e1],
            self.noise,
            self.postprocess,
        )
    }

    pub fn with_postprocess(self, postprocess: Postprocess) -> Result<Self> {
        Self::build(
            self.bases,
            self.counted,
            self.accept,
            self.noise,
            postprocess,
        )
    }

    fn build(
        bases: Vec<QubitBasis>,
        counted: Vec<bool>,
        accept: [f64; 2],
        noise: DiscreteLaplace,
        postprocess: Postprocess,
    ) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Empty("measurement on no registers"));
        }
        if bases.len() > 40 {
            return Err(Error::TooLarge(bases.len()));
        }
        if counted.len() != bases.len() {
            return Err(Error::DimensionMismatch {
                expected: bases.len(),
                got: counted.len(),
            });
        }
        if accept.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(invalid_arg(format!(
                "acceptance probabilities {accept:?} outside [0, 1]"
            )));
        }
        let n = counted.iter().filter(|&&b| b).count();
        if let Postprocess::Threshold { half_width, center } = postprocess {
            if !(half_width > 0.0) || !center.is_finite() {
                return Err(invalid_arg(format!(
                    "threshold needs half_width > 0, got {half_width}"
                )));
            }
            if n == 0 {
                return Err(invalid_arg("threshold on an empty count"));
            }
        }
        let kernel = CountKernel::build(n, accept, &noise, postprocess);
        Ok(Self {
            bases,
            counted,
            accept,
            noise,
            postprocess,
            kernel,
        })
    }

    pub fn bases(&self) -> &[QubitBasis] {
        &self.bases
    }

    pub fn counted(&self) -> &[bool] {
        &self.counted
    }

    pub fn accept(&self) -> [f64; 2] {
        self.accept
    }

    pub fn noise(&self) -> &DiscreteLaplace {
        &self.noise
    }

    pub fn postprocess(&self) -> Postprocess {
        self.postprocess
    }

    pub fn kernel(&self) -> &CountKernel {
        &self.kernel
    }

    pub fn num_registers(&self) -> usize {
        self.bases.len()
    }

    pub fn num_counted(&self) -> usize {
        self.kernel.n
    }

    /// Index bit mask of the counted registers (register 0 is the top bit).
    fn counted_mask(&self) -> usize {
        let r = self.bases.len();
        self.counted
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| 1usize << (r - 1 - i))
            .sum()
    }

    fn check_qubits(&self, dims: &[usize]) -> Result<()> {
        if dims.len() != self.bases.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bases.len(),
                got: dims.len(),
            });
        }
        if dims.iter().any(|&d| d != 2) {
            return Err(invalid_arg(
                "noisy-count measurements act on qubit registers only",
            ));
        }
        Ok(())
    }

    fn rotate(&self, amps: &mut [C64], inverse: bool) {
        let r = self.bases.len();
        for (q, b) in self.bases.iter().enumerate() {
            let u = b.rotation();
            apply_qubit_gate(amps, r, q, &if inverse { u.adjoint() } else { u });
        }
    }

    /// U ρ U† (or U† ρ U) for the product rotation.
    fn rotate_density(&self, m: &CMatrix, inverse: bool) -> CMatrix {
        let mut a = m.clone();
        for mut col in a.column_iter_mut() {
            self.rotate(col.as_mut_slice(), inverse);
        }
        let mut b = a.adjoint();
        for mut col in b.column_iter_mut() {
            self.rotate(col.as_mut_slice(), inverse);
        }
        b
    }

    fn weights_from_rotated(&self, amps: &[C64]) -> Vec<f64> {
        let mask = self.counted_mask();
        let mut w = vec![0.0; self.num_counted() + 1];
        for (i, a) in amps.iter().enumerate() {
            w[(i & mask).count_ones() as usize] += a.norm_sqr();
        }
        w
    }

    /// B(w): distribution of the eigenbasis count w on the counted registers.
    pub fn weights_pure(&self, psi: &PureState) -> Result<Vec<f64>> {
        self.check_qubits(psi.dims())?;
        let mut amps = psi.amplitudes().clone();
        self.rotate(amps.as_mut_slice(), false);
        Ok(self.weights_from_rotated(amps.as_slice()))
    }

    pub fn weights_density(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.check_qubits(rho.dims())?;
        let rot = self.rotate_density(rho.matrix(), false);
        let mask = self.counted_mask();
        let mut w = vec![0.0; self.num_counted() + 1];
        for i in 0..rot.nrows() {
            w[(i & mask).count_ones() as usize] += rot[(i, i)].re.max(0.0);
        }
        Ok(w)
    }

    /// Weights for a product of single-qubit states, by convolution.
    pub fn weights_product(&self, qubits: &[DensityMatrix]) -> Result<Vec<f64>> {
        if qubits.len() != self.bases.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bases.len(),
                got: qubits.len(),
            });
        }
        let mut p = Vec::with_capacity(self.num_counted());
        for ((rho, b), &c) in qubits.iter().zip(&self.bases).zip(&self.counted) {
            if rho.dim() != 2 {
                return Err(invalid_arg("product factors must be single qubits"));
            }
            if c {
                let v1 = b.vector(1);
                p.push(v1.dotc(&(rho.matrix() * &v1)).re.clamp(0.0, 1.0));
            }
        }
        Ok(hamming_weight_pmf(&p))
    }

    pub fn weights_product_pure(&self, qubits: &[PureState]) -> Result<Vec<f64>> {
        let rhos: Vec<DensityMatrix> = qubits.iter().map(PureState::to_density).collect();
        self.weights_product(&rhos)
    }

    pub fn weights(&self, state: &State) -> Result<Vec<f64>> {
        match state {
            State::Pure(p) => self.weights_pure(p),
            State::Mixed(m) => self.weights_density(m),
        }
    }

    pub fn outcome_dist_from_weights(&self, weights: &[f64]) -> Result<FiniteDistribution> {
        self.kernel.outcome_dist(weights)
    }

    /// Outcome distribution on a pure or mixed joint state.
    pub fn outcome_dist(&self, state: &State) -> Result<FiniteDistribution> {
        self.kernel.outcome_dist(&self.weights(state)?)
    }

    fn scale_factors(&self, weights: &[f64], y: i64) -> Result<(Vec<f64>, f64)> {
        let row = self.kernel.row(y)?;
        let p: f64 = row.iter().zip(weights).map(|(k, b)| k * b).sum();
        if !(p >= MIN_OUTCOME_PROB) {
            return Err(Error::ZeroProbability(y));
        }
        Ok((row.iter().map(|k| (k / p).sqrt()).collect(), p))
    }

    /// ⟨ψ|ψ_y⟩ = Σ_w B(w)·√(Pr[y|w]/Pr[y]) and Pr[y].
    pub fn overlap_from_weights(&self, weights: &[f64], y: i64) -> Result<(f64, f64)> {
        let (f, p) = self.scale_factors(weights, y)?;
        Ok((
            weights
                .iter()
                .zip(&f)
                .map(|(b, s)| b * s)
                .sum::<f64>()
                .min(1.0),
            p,
        ))
    }

    /// Trace distance between a pure input and its post-measurement state.
    pub fn damage_pure(&self, psi: &PureState, y: i64) -> Result<f64> {
        let (ov, _) = self.overlap_from_weights(&self.weights_pure(psi)?, y)?;
        Ok((1.0 - ov * ov).max(0.0).sqrt())
    }

    /// Post-measurement state for outcome `y`: amplitudes rescaled by
    /// √(Pr[y|w]/Pr[y]) in the rotated basis. Returns the state and Pr[y].
    pub fn condition_pure(&self, psi: &PureState, y: i64) -> Result<(PureState, f64)> {
        self.check_qubits(psi.dims())?;
        let mut amps = psi.amplitudes().clone();
        self.rotate(amps.as_mut_slice(), false);
        let weights = self.weights_from_rotated(amps.as_slice());
        let p = self.rescale(amps.as_mut_slice(), &weights, y)?;
        self.rotate(amps.as_mut_slice(), true);
        Ok((PureState::normalized(amps, psi.dims().to_vec())?, p))
    }

    fn rescale(&self, amps: &mut [C64], weights: &[f64], y: i64) -> Result<f64> {
        let (f, p) = self.scale_factors(weights, y)?;
        let mask = self.counted_mask();
        for (i, a) in amps.iter_mut().enumerate() {
            *a *= f[(i & mask).count_ones() as usize];
        }
        Ok(p)
    }

    /// ρ_y with entries ρ_XY·√(Pr[y|X]·Pr[y|Y})/Pr[y] in the rotated basis.
    pub fn condition_density(&self, rho: &DensityMatrix, y: i64) -> Result<(DensityMatrix, f64)> {
        let weights = self.weights_density(rho)?;
        let (f, p) = self.scale_factors(&weights, y)?;
        let mask = self.counted_mask();
        let mut rot = self.rotate_density(rho.matrix(), false);
        let d = rot.nrows();
        let fi: Vec<f64> = (0..d)
            .map(|i| f[(i & mask).count_ones() as usize])
            .collect();
        for col in 0..d {
            for row in 0..d {
                rot[(row, col)] *= fi[row] * fi[col];
            }
        }
        let back = linalg::hermitize(&self.rotate_density(&rot, true));
        Ok((
            DensityMatrix::from_unnormalized(back, rho.dims().to_vec())?,
            p,
        ))
    }

    pub fn condition(&self, state: &State, y: i64) -> Result<(State, f64)> {
        Ok(match state {
            State::Pure(p) => {
                let (s, pr) = self.condition_pure(p, y)?;
                (State::Pure(s), pr)
            }
            State::Mixed(m) => {
                let (s, pr) = self.condition_density(m, y)?;
                (State::Mixed(s), pr)
            }
        })
    }

    /// Samples an outcome and returns it with the conditioned state and its probability.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        psi: &PureState,
        rng: &mut R,
    ) -> Result<(i64, PureState, f64)> {
        self.check_qubits(psi.dims())?;
        let mut amps = psi.amplitudes().clone();
        self.rotate(amps.as_mut_slice(), false);
        let weights = self.weights_from_rotated(amps.as_slice());
        let dist = self.kernel.outcome_dist(&weights)?;
        let y = sample_possible(&dist, rng)?;
        let p = self.rescale(amps.as_mut_slice(), &weights, y)?;
        self.rotate(amps.as_mut_slice(), true);
        Ok((y, PureState::normalized(amps, psi.dims().to_vec())?, p))
    }
}

/// Draws from `dist`, redrawing if rounding lands on an outcome of
/// negligible probability.
pub(crate) fn sample_possible<R: Rng + ?Sized>(
    dist: &FiniteDistribution,
    rng: &mut R,
) -> Result<i64> {
    for _ in 0..64 {
        let y = dist.sample(rng);
        if dist.prob(y) >= MIN_OUTCOME_PROB {
            return Ok(y);
        }
    }
    Err(Error::InvalidState(
        "could not sample an outcome of positive probability".into(),
    ))
}

/// Outcome distribution of `meas` on `state`.
pub fn noisy_count_outcome_dist(
    state: &State,
    meas: &NoisyCountMeasurement,
) -> Result<FiniteDistribution> {
    meas.outcome_dist(state)
}

/// Seeded measurement of a pure joint state.
pub fn noisy_count_measure(
    psi: &PureState,
    meas: &NoisyCountMeasurement,
    seed: u64,
) -> Result<(i64, PureState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (y, post, _) = meas.measure(psi, &mut rng)?;
    Ok((y, post))
}

/// Pr[label | eigenbasis count w] for every reported label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountKernel {
    n: usize,
    labels: Vec<i64>,
    /// `rows[i][w]` = Pr[labels[i] | w].
    rows: Vec<Vec<f64>>,
}

impl CountKernel {
    fn build(
        n: usize,
        accept: [f64; 2],
        noise: &DiscreteLaplace,
        postprocess: Postprocess,
    ) -> Self {
        let projective = accept == [0.0, 1.0];
        // accepts[w][a] = Pr[a accepts | w registers in |v₁⟩].
        let accepts: Vec<Vec<f64>> = (0..=n)
            .map(|w| {
                if projective {
                    let mut v = vec![0.0; n + 1];
                    v[w] = 1.0;
                    v
                } else {
                    let mut p = vec![accept[1]; w];
                    p.extend(std::iter::repeat_n(accept[0], n - w));
                    hamming_weight_pmf(&p)
                }
            })
            .collect();
        let raw_labels: Vec<i64> = noise.count_outputs(n).collect();
        let raw_rows: Vec<Vec<f64>> = raw_labels
            .iter()
            .map(|&y| {
                (0..=n)
                    .map(|w| {
                        accepts[w]
                            .iter()
                            .enumerate()
                            .map(|(a, pa)| pa * noise.clamped_count_kernel(n, a, y))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        match postprocess {
            Postprocess::RawCount => Self {
                n,
                labels: raw_labels,
                rows: raw_rows,
            },
            Postprocess::Threshold { center, half_width } => {
                let mut rows = vec![vec![0.0; n + 1]; 2];
                for (y, row) in raw_labels.iter().zip(&raw_rows) {
                    let u = usize::from(threshold_fires(*y, n, center, half_width));
                    for (acc, k) in rows[u].iter_mut().zip(row) {
                        *acc += k;
                    }
                }
                Self {
                    n,
                    labels: vec![0, 1],
                    rows,
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn index_of(&self, y: i64) -> Option<usize> {
        let first = *self.labels.first()?;
        let i = y.checked_sub(first)?;
        (i >= 0 && (i as usize) < self.labels.len()).then_some(i as usize)
    }

    /// Pr[y | w] for w = 0..=n.
    pub fn row(&self, y: i64) -> Result<&[f64]> {
        self.index_of(y)
            .map(|i| self.rows[i].as_slice())
            .ok_or(Error::ZeroProbability(y))
    }

    pub fn outcome_dist(&self, weights: &[f64]) -> Result<FiniteDistribution> {
        if weights.len() != self.n + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.n + 1,
                got: weights.len(),
            });
        }
        let probs = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(weights)
                    .map(|(k, b)| k * b)
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect();
        FiniteDistribution::normalized(self.labels.clone(), probs)
    }
}

/// |y/n − c| > h, strictly.
pub fn threshold_fires(y: i64, n: usize, center: f64, half_width: f64) -> bool {
    (y as f64 / n as f64 - center).abs() > half_width
}

impl OutputKernel for CountKernel {
    fn num_bits(&self) -> usize {
        self.n
    }

    fn outputs(&self) -> Vec<i64> {
        self.labels.clone()
    }

    fn prob(&self, x: u64, y: i64) -> f64 {
        self.index_of(y)
            .map_or(0.0, |i| self.rows[i][x.count_ones() as usize])
    }

    fn weight_prob(&self, w: usize, y: i64) -> Option<f64> {
        Some(self.index_of(y).map_or(0.0, |i| self.rows[i][w]))
    }
}
