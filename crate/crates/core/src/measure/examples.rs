//! Randomized response, the noisy block-parity measurement, Bell-pair
//! projection, and the rebit witness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_1_SQRT_2;

use super::count::{sample_possible, MIN_OUTCOME_PROB};
use super::instrument::Instrument;
use crate::classical::{hamming_weight_pmf, DiscreteLaplace, FiniteDistribution};
use crate::error::{invalid_arg, Error, Result};
use crate::linalg::{self, re, CMatrix, C64};
use crate::quantum::{apply_register_matrix, DensityMatrix, PovmElement, PureState, State};

/// Single-qubit randomized response R_β: with probability 1−2β report a fair
/// coin and leave the qubit alone, otherwise measure it and report the result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomizedResponse {
    beta: f64,
}

impl RandomizedResponse {
    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&beta) {
            return Err(invalid_arg(format!("β must lie in [0, 1/2), got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// ln((1+2β)/(1−2β)).
    pub fn dp_epsilon(&self) -> f64 {
        ((1.0 + 2.0 * self.beta) / (1.0 - 2.0 * self.beta)).ln()
    }

    /// E_b = (1/2 − β)·I + 2β·|b⟩⟨b|.
    pub fn povm(&self) -> [PovmElement; 2] {
        let e = |b: usize| {
            let mut m = linalg::identity(2).scale(0.5 - self.beta);
            m[(b, b)] += re(2.0 * self.beta);
            PovmElement::from_matrix_unchecked(m)
        };
        [e(0), e(1)]
    }

    fn check(rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != 2 {
            return Err(invalid_arg("randomized response acts on single qubits"));
        }
        Ok(())
    }

    pub fn prob(&self, rho: &DensityMatrix, b: usize) -> f64 {
        (0.5 - self.beta) + 2.0 * self.beta * rho.matrix()[(b, b)].re
    }

    /// ((1/2 − β)·ρ + 2β·ρ_bb·|b⟩⟨b|) / Pr[b].
    pub fn post(&self, rho: &DensityMatrix, b: usize) -> Result<DensityMatrix> {
        Self::check(rho)?;
        let p = self.prob(rho, b);
        if p < MIN_OUTCOME_PROB {
            return Err(Error::ZeroProbability(b as i64));
        }
        let mut m = rho.matrix().scale(0.5 - self.beta);
        m[(b, b)] += re(2.0 * self.beta * rho.matrix()[(b, b)].re);
        DensityMatrix::from_unnormalized(m, vec![2])
    }
}

impl Instrument for RandomizedResponse {
    fn outcome_dist(&self, state: &State) -> Result<FiniteDistribution> {
        let rho = state.to_density();
        Self::check(&rho)?;
        FiniteDistribution::normalized(vec![0, 1], vec![self.prob(&rho, 0), self.prob(&rho, 1)])
    }

    fn post_state(&self, state: &State, y: i64) -> Result<State> {
        if !(0..=1).contains(&y) {
            return Err(Error::ZeroProbability(y));
        }
        Ok(State::Mixed(self.post(&state.to_density(), y as usize)?))
    }
}

/// Applies R_β to each qubit independently; returns the bits and post-states.
pub fn randomized_response(
    states: &[DensityMatrix],
    beta: f64,
    seed: u64,
) -> Result<(Vec<u8>, Vec<DensityMatrix>)> {
    let rr = RandomizedResponse::new(beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = Vec::with_capacity(states.len());
    let mut posts = Vec::with_capacity(states.len());
    for rho in states {
        RandomizedResponse::check(rho)?;
        let b = usize::from(rng.random::<f64>() >= rr.prob(rho, 0));
        bits.push(b as u8);
        posts.push(rr.post(rho, b)?);
    }
    Ok((bits, posts))
}

/// Rows ⟨00|, ⟨01|, ⟨1+|, ⟨1−|: maps the pair basis onto |0⟩…|3⟩.
pub fn pair_basis_rotation() -> CMatrix {
    let h = FRAC_1_SQRT_2;
    CMatrix::from_row_slice(
        4,
        4,
        &[
            re(1.0),
            re(0.0),
            re(0.0),
            re(0.0),
            re(0.0),
            re(1.0),
            re(0.0),
            re(0.0),
            re(0.0),
            re(0.0),
            re(h),
            re(h),
            re(0.0),
            re(0.0),
            re(h),
            re(-h),
        ],
    )
}

/// Pair outcomes |00⟩ and |1+⟩ flip their block's parity.
fn marks_parity(digit: usize) -> bool {
    digit == 0 || digit == 2
}

/// Noisy sum of block parities: pairs are measured in {|00⟩,|01⟩,|1+⟩,|1−⟩},
/// each block of `k` qubits yields the parity of its |00⟩/|1+⟩ count, and
/// the number of odd blocks is reported with discrete Laplace noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyParity {
    n: usize,
    k: usize,
    noise: DiscreteLaplace,
}

impl NoisyParity {
    pub fn new(n: usize, k: usize, sigma: f64) -> Result<Self> {
        if k == 0 || !k.is_multiple_of(2) {
            return Err(invalid_arg(format!(
                "block size must be positive and even, got {k}"
            )));
        }
        if n == 0 || !n.is_multiple_of(k) {
            return Err(invalid_arg(format!(
                "{n} qubits cannot be split into blocks of {k}"
            )));
        }
        Ok(Self {
            n,
            k,
            noise: DiscreteLaplace::new(sigma)?,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.n / self.k
    }

    pub fn noise(&self) -> &DiscreteLaplace {
        &self.noise
    }

    fn pair_dims(&self) -> Vec<usize> {
        vec![4; self.n / 2]
    }

    fn check(&self, psi: &PureState) -> Result<()> {
        if psi.dims().len() != self.n || !psi.is_all_qubits() {
            return Err(invalid_arg(format!("expected {} qubit registers", self.n)));
        }
        Ok(())
    }

    fn rotate(&self, amps: &mut [C64], inverse: bool) {
        let v = pair_basis_rotation();
        let v = if inverse { v.adjoint() } else { v };
        let dims = self.pair_dims();
        for pair in 0..dims.len() {
            apply_register_matrix(amps, &dims, pair, &v);
        }
    }

    /// Γ for a basis index in the rotated frame.
    fn gamma(&self, index: usize) -> usize {
        let pairs = self.n / 2;
        let per_block = self.k / 2;
        (0..self.num_blocks())
            .filter(|b| {
                let marked = (b * per_block..(b + 1) * per_block)
                    .filter(|&j| marks_parity((index >> (2 * (pairs - 1 - j))) & 3))
                    .count();
                marked % 2 == 1
            })
            .count()
    }

    fn gamma_weights_rotated(&self, amps: &[C64]) -> Vec<f64> {
        let mut w = vec![0.0; self.num_blocks() + 1];
        for (i, a) in amps.iter().enumerate() {
            w[self.gamma(i)] += a.norm_sqr();
        }
        w
    }

    /// Distribution of Γ on a joint pure state.
    pub fn gamma_weights(&self, psi: &PureState) -> Result<Vec<f64>> {
        self.check(psi)?;
        let mut amps = psi.amplitudes().clone();
        self.rotate(amps.as_mut_slice(), false);
        Ok(self.gamma_weights_rotated(amps.as_slice()))
    }

    /// Distribution of Γ on a product of two-qubit pair states.
    pub fn gamma_weights_pairs(&self, pairs: &[PureState]) -> Result<Vec<f64>> {
        if pairs.len() != self.n / 2 || pairs.iter().any(|p| p.dim() != 4) {
            return Err(invalid_arg(format!(
                "expected {} two-qubit pair states",
                self.n / 2
            )));
        }
        let v = pair_basis_rotation();
        let per_block = self.k / 2;
        let odd: Vec<f64> = pairs
            .chunks(per_block)
            .map(|block| {
                // Pr[odd] = (1 − Π(1 − 2m_j))/2 for independent marks.
                let prod: f64 = block
                    .iter()
                    .map(|p| {
                        let r = &v * p.amplitudes();
                        let m = r[0].norm_sqr() + r[2].norm_sqr();
                        1.0 - 2.0 * m
                    })
                    .product();
                ((1.0 - prod) / 2.0).clamp(0.0, 1.0)
            })
            .collect();
        Ok(hamming_weight_pmf(&odd))
    }

    pub fn outcome_dist_from_gamma(&self, gamma: &[f64]) -> Result<FiniteDistribution> {
        let m = self.num_blocks();
        let labels: Vec<i64> = self.noise.count_outputs(m).collect();
        let probs = labels
            .iter()
            .map(|&y| {
                gamma
                    .iter()
                    .enumerate()
                    .map(|(g, p)| p * self.noise.clamped_count_kernel(m, g, y))
                    .sum()
            })
            .collect();
        FiniteDistribution::normalized(labels, probs)
    }

    fn rescale(&self, amps: &mut [C64], gamma: &[f64], y: i64) -> Result<f64> {
        let m = self.num_blocks();
        let k: Vec<f64> = (0..=m)
            .map(|g| self.noise.clamped_count_kernel(m, g, y))
            .collect();
        let p: f64 = k.iter().zip(gamma).map(|(a, b)| a * b).sum();
        if !(p >= MIN_OUTCOME_PROB) {
            return Err(Error::ZeroProbability(y));
        }
        for (i, a) in amps.iter_mut().enumerate() {
            *a *= (k[self.gamma(i)] / p).sqrt();
        }
        Ok(p)
    }

    pub fn condition(&self, psi: &PureState, y: i64) -> Result<PureState> {
        self.check(psi)?;
        let mut amps = psi.amplitudes().clone();
        self.rotate(amps.as_mut_slice(), false);
        let gamma = self.gamma_weights_rotated(amps.as_slice());
        self.rescale(amps.as_mut_slice(), &gamma, y)?;
        self.rotate(amps.as_mut_slice(), true);
        PureState::normalized(amps, psi.dims().to_vec())
    }

    pub fn measure<R: Rng + ?Sized>(
        &self,
        psi: &PureState,
        rng: &mut R,
    ) -> Result<(i64, PureState)> {
        self.check(psi)?;
        let mut amps = psi.amplitudes().clone();
        self.rotate(amps.as_mut_slice(), false);
        let gamma = self.gamma_weights_rotated(amps.as_slice());
        let y = sample_possible(&self.outcome_dist_from_gamma(&gamma)?, rng)?;
        self.rescale(amps.as_mut_slice(), &gamma, y)?;
        self.rotate(amps.as_mut_slice(), true);
        Ok((y, PureState::normalized(amps, psi.dims().to_vec())?))
    }
}

impl Instrument for NoisyParity {
    fn outcome_dist(&self, state: &State) -> Result<FiniteDistribution> {
        match state {
            State::Pure(p) => self.outcome_dist_from_gamma(&self.gamma_weights(p)?),
            State::Mixed(_) => Err(invalid_arg("noisy parity is simulated on pure states")),
        }
    }

    fn post_state(&self, state: &State, y: i64) -> Result<State> {
        match state {
            State::Pure(p) => Ok(State::Pure(self.condition(p, y)?)),
            State::Mixed(_) => Err(invalid_arg("noisy parity is simulated on pure states")),
        }
    }
}

/// Seeded noisy-parity measurement of a pure state of `n` qubits.
pub fn noisy_parity_measurement(
    psi: &PureState,
    k: usize,
    sigma: f64,
    seed: u64,
) -> Result<(i64, PureState)> {
    let m = NoisyParity::new(psi.num_registers(), k, sigma)?;
    m.measure(psi, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Largest odd register count accepted by the Bell-projection simulator.
pub const BELL_MAX_QUBITS: usize = 11;

/// Projects qubit pairs (0,1), (2,3), … onto (|00⟩+|11⟩)/√2. If every pair
/// succeeds the last qubit is measured in the computational basis; otherwise
/// a fair coin is reported.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BellProjection;

/// Rows ⟨Φ+|, ⟨Φ−|, ⟨Ψ+|, ⟨Ψ−|.
fn bell_rotation() -> CMatrix {
    let h = FRAC_1_SQRT_2;
    CMatrix::from_row_slice(
        4,
        4,
        &[
            re(h),
            re(0.0),
            re(0.0),
            re(h),
            re(h),
            re(0.0),
            re(0.0),
            re(-h),
            re(0.0),
            re(h),
            re(h),
            re(0.0),
            re(0.0),
            re(h),
            re(-h),
            re(0.0),
        ],
    )
}

impl BellProjection {
    fn rotated(psi: &PureState) -> Result<(Vec<C64>, Vec<usize>)> {
        let n = psi.num_registers();
        if n.is_multiple_of(2) || !psi.is_all_qubits() {
            return Err(invalid_arg(format!(
                "Bell projection needs an odd number of qubits, got {n}"
            )));
        }
        if n > BELL_MAX_QUBITS {
            return Err(Error::TooLarge(n));
        }
        let mut dims = vec![4; n / 2];
        dims.push(2);
        let mut amps: Vec<C64> = psi.amplitudes().iter().copied().collect();
        let v = bell_rotation();
        for pair in 0..n / 2 {
            apply_register_matrix(&mut amps, &dims, pair, &v);
        }
        Ok((amps, dims))
    }

    /// Per-pair success pattern of a rotated index; bit set where the pair is Φ+.
    fn pattern(index: usize, pairs: usize) -> usize {
        (0..pairs)
            .filter(|&j| (index >> (1 + 2 * (pairs - 1 - j))) & 3 == 0)
            .map(|j| 1 << j)
            .sum()
    }

    /// Pr[output 0], Pr[output 1].
    pub fn probs(psi: &PureState) -> Result<[f64; 2]> {
        let (amps, _) = Self::rotated(psi)?;
        let (s0, s1) = (amps[0].norm_sqr(), amps[1].norm_sqr());
        let fail = (1.0 - s0 - s1).max(0.0);
        Ok([s0 + fail / 2.0, s1 + fail / 2.0])
    }

    /// Post-measurement density matrix given output `b`.
    pub fn post(psi: &PureState, b: usize) -> Result<DensityMatrix> {
        let (amps, dims) = Self::rotated(psi)?;
        let pairs = dims.len() - 1;
        let all = (1 << pairs) - 1;
        let d = amps.len();
        let pat: Vec<usize> = (0..d).map(|i| Self::pattern(i, pairs)).collect();
        let mut rho = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                if pat[i] == pat[j] && pat[i] != all {
                    rho[(i, j)] = amps[i] * amps[j].conj() * 0.5;
                }
            }
        }
        rho[(b, b)] += re(amps[b].norm_sqr());
        let p = linalg::trace(&rho).re;
        if p < MIN_OUTCOME_PROB {
            return Err(Error::ZeroProbability(b as i64));
        }
        let mut u = linalg::identity(1);
        for _ in 0..pairs {
            u = linalg::kron(&u, &bell_rotation());
        }
        let u = linalg::kron(&u, &linalg::identity(2));
        let back = u.adjoint() * rho * &u;
        DensityMatrix::from_unnormalized(back, psi.dims().to_vec())
    }
}

impl Instrument for BellProjection {
    fn outcome_dist(&self, state: &State) -> Result<FiniteDistribution> {
        match state {
            State::Pure(p) => FiniteDistribution::normalized(vec![0, 1], Self::probs(p)?.to_vec()),
            State::Mixed(_) => Err(invalid_arg("Bell projection is simulated on pure states")),
        }
    }

    fn post_state(&self, state: &State, y: i64) -> Result<State> {
        match (state, y) {
            (State::Pure(p), 0 | 1) => Ok(State::Mixed(Self::post(p, y as usize)?)),
            (State::Pure(_), _) => Err(Error::ZeroProbability(y)),
            (State::Mixed(_), _) => Err(invalid_arg("Bell projection is simulated on pure states")),
        }
    }
}

/// Seeded Bell-projection measurement.
pub fn bell_projection_measurement(psi: &PureState, seed: u64) -> Result<(u8, DensityMatrix)> {
    let [p0, _] = BellProjection::probs(psi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = usize::from(rng.random::<f64>() >= p0);
    Ok((b as u8, BellProjection::post(psi, b)?))
}

/// E = ½[[1,0,0,−1],[0,1,1,0],[0,1,1,0],[−1,0,0,1]].
pub fn rebit_witness_effect() -> PovmElement {
    let m = CMatrix::from_row_slice(
        4,
        4,
        &[
            re(0.5),
            re(0.0),
            re(0.0),
            re(-0.5),
            re(0.0),
            re(0.5),
            re(0.5),
            re(0.0),
            re(0.0),
            re(0.5),
            re(0.5),
            re(0.0),
            re(-0.5),
            re(0.0),
            re(0.0),
            re(0.5),
        ],
    );
    PovmElement::from_matrix_unchecked(m)
}

/// ⟨ψ|E|ψ⟩ for the rebit witness E.
pub fn rebit_witness(psi: &PureState) -> Result<f64> {
    if psi.dims() != [2, 2] {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: psi.dim(),
        });
    }
    rebit_witness_effect().expectation_pure(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::pure_trace_distance;

    #[test]
    fn rr_examples() {
        let rr = RandomizedResponse::new(0.25).unwrap();
        let zero = PureState::zero().to_density();
        assert!((rr.prob(&zero, 0) - 0.75).abs() < 1e-15);
        assert!((rr.dp_epsilon() - 3f64.ln()).abs() < 1e-15);
        let fair = RandomizedResponse::new(0.0).unwrap();
        let rho = DensityMatrix::qubit_bloch_vector(0.3, 0.1, 0.6).unwrap();
        assert!((fair.prob(&rho, 1) - 0.5).abs() < 1e-15);
        assert!(
            linalg::max_abs_entry(&(fair.post(&rho, 1).unwrap().matrix() - rho.matrix())) < 1e-15
        );
        assert!(RandomizedResponse::new(0.5).is_err());
    }

    #[test]
    fn rr_post_matches_povm_mixture() {
        // Oracle: branch (1−2β) fair coin, branch 2β projective readout.
        let beta = 0.2;
        let rr = RandomizedResponse::new(beta).unwrap();
        let rho = DensityMatrix::qubit_bloch_vector(0.5, -0.3, 0.2).unwrap();
        for b in 0..2 {
            let mut proj = CMatrix::zeros(2, 2);
            proj[(b, b)] = re(1.0);
            let branch = rho.matrix().scale((1.0 - 2.0 * beta) * 0.5)
                + (&proj * rho.matrix() * &proj).scale(2.0 * beta);
            let p = linalg::trace(&branch).re;
            let post = rr.post(&rho, b).unwrap();
            assert!(linalg::max_abs_entry(&(branch.unscale(p) - post.matrix())) < 1e-14);
            let e = &rr.povm()[b];
            assert!((e.expectation(&rho).unwrap() - p).abs() < 1e-14);
        }
    }

    #[test]
    fn parity_eigenstate_input() {
        let m = NoisyParity::new(8, 4, 1.0).unwrap();
        let psi = PureState::zero().power(8).unwrap();
        let g = m.gamma_weights(&psi).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12);
        let m6 = NoisyParity::new(12, 6, 1.0).unwrap();
        let g = m6
            .gamma_weights(&PureState::zero().power(12).unwrap())
            .unwrap();
        assert!((g[2] - 1.0).abs() < 1e-12);
        let (_, post) = m.measure(&psi, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(pure_trace_distance(&post, &psi).unwrap() < 1e-7);
        assert!(NoisyParity::new(10, 4, 1.0).is_err());
        assert!(NoisyParity::new(9, 3, 1.0).is_err());
    }

    #[test]
    fn parity_product_path_matches_statevector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = NoisyParity::new(8, 4, 1.0).unwrap();
        let pairs: Vec<PureState> = (0..4)
            .map(|_| crate::quantum::random::haar_state(&mut rng, vec![2, 2]))
            .collect();
        let joint = PureState::tensor_all(&pairs).unwrap();
        let joint = PureState::new(joint.amplitudes().clone(), vec![2; 8]).unwrap();
        let a = m.gamma_weights(&joint).unwrap();
        let b = m.gamma_weights_pairs(&pairs).unwrap();
        for g in 0..a.len() {
            assert!((a[g] - b[g]).abs() < 1e-12);
        }
    }

    #[test]
    fn bell_examples() {
        let zero_tail = PureState::bell().tensor(&PureState::zero());
        let p = BellProjection::probs(&zero_tail).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        let plus_tail =
            PureState::tensor_all(&[PureState::bell(), PureState::bell(), PureState::plus()])
                .unwrap();
        let p = BellProjection::probs(&plus_tail).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!(BellProjection::probs(&PureState::bell()).is_err());
        let post = BellProjection::post(&zero_tail, 0).unwrap();
        assert!(linalg::max_abs_entry(&(post.matrix() - zero_tail.to_density().matrix())) < 1e-12);
    }

    #[test]
    fn bell_post_is_normalised_on_failure() {
        let psi = PureState::tensor_all(&[PureState::zero(), PureState::one(), PureState::plus()])
            .unwrap();
        let p = BellProjection::probs(&psi).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        let post = BellProjection::post(&psi, 1).unwrap();
        assert!(linalg::max_abs_entry(&(post.matrix() - psi.to_density().matrix())) < 1e-12);
    }

    #[test]
    fn rebit_values() {
        let h = FRAC_1_SQRT_2;
        let psi_plus =
            PureState::from_amplitudes(vec![re(0.0), re(h), re(h), re(0.0)], vec![2, 2]).unwrap();
        assert!((rebit_witness(&psi_plus).unwrap() - 1.0).abs() < 1e-12);
        assert!(rebit_witness(&PureState::bell()).unwrap().abs() < 1e-12);
        assert!(rebit_witness(&PureState::zero()).is_err());
    }
}
