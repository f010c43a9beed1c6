//! Matrix multiplicative weights as the online learner.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid_arg, Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::quantum::{DensityMatrix, PovmElement};

/// The learner's hypothesis σ ∝ exp(−η L) together with the loss L.
#[derive(Clone, Debug)]
pub struct HypothesisState {
    sigma: DensityMatrix,
    loss: CMatrix,
    eta: f64,
    update_count: usize,
}

impl HypothesisState {
    pub fn sigma(&self) -> &DensityMatrix {
        &self.sigma
    }

    pub fn loss_accumulator(&self) -> &CMatrix {
        &self.loss
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// Tr(Eσ).
    pub fn predict(&self, effect: &PovmElement) -> Result<f64> {
        effect.expectation(&self.sigma)
    }

    /// In-place form of [`online_update`].
    pub fn update(&mut self, effect: &PovmElement, answer: f64) -> Result<()> {
        if effect.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: effect.dim(),
            });
        }
        if !answer.is_finite() {
            return Err(invalid_arg("answer must be finite"));
        }
        let pred = self.predict(effect)?;
        if pred != answer {
            let sign = (pred - answer).signum();
            self.loss += effect.matrix() * C64::new(sign, 0.0);
            self.loss = linalg::hermitize(&self.loss);
            let m = linalg::hermitize(&linalg::hermitian_exp(&self.loss, -self.eta, true));
            self.sigma = DensityMatrix::from_unnormalized(m, vec![self.dim()])?;
        }
        self.update_count += 1;
        Ok(())
    }
}

/// σ₀ = I/d with an empty loss.
pub fn online_learn(d: usize, eta: f64) -> Result<HypothesisState> {
    if d < 2 {
        return Err(invalid_arg(format!("learner needs d >= 2, got {d}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid_arg(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    Ok(HypothesisState {
        sigma: DensityMatrix::maximally_mixed(vec![d])?,
        loss: CMatrix::zeros(d, d),
        eta,
        update_count: 0,
    })
}

/// L += sign(Tr(Eσ) − b)·E, then σ = exp(−ηL)/Tr exp(−ηL).
pub fn online_update(
    h: &HypothesisState,
    effect: &PovmElement,
    answer: f64,
) -> Result<HypothesisState> {
    let mut next = h.clone();
    next.update(effect, answer)?;
    Ok(next)
}

pub fn default_eta(eps: f64) -> f64 {
    eps / 20.0
}

/// ⌈16 ln d / ε²⌉.
pub fn mistake_bound(d: usize, eps: f64) -> usize {
    (16.0 * (d as f64).ln() / (eps * eps)).ceil() as usize
}

/// Default abort threshold ℓ(d, ε) = ⌈16 ln d / ε²⌉ + 1.
pub fn default_update_cap(d: usize, eps: f64) -> usize {
    mistake_bound(d, eps) + 1
}

#[derive(Clone, Debug, Serialize)]
pub struct MistakeRun {
    pub dim: usize,
    pub eps: f64,
    pub eta: f64,
    pub updates: usize,
    /// max over effects of |Tr(E(ρ − σ))| when the run stopped.
    pub final_error: f64,
    pub converged: bool,
}

/// The effect maximising |Tr(E(ρ − σ))|: the projector onto the positive
/// part of ρ − σ. Returns it with the error it achieves.
pub fn worst_effect(target: &DensityMatrix, sigma: &DensityMatrix) -> Result<(PovmElement, f64)> {
    if target.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: target.dim(),
        });
    }
    let delta = target.matrix() - sigma.matrix();
    let (vals, vecs) = linalg::hermitian_eigen(&delta);
    let d = vals.len();
    let mut p = CMatrix::zeros(d, d);
    let mut err = 0.0;
    for (k, &l) in vals.iter().enumerate() {
        if l > 0.0 {
            let v = vecs.column(k);
            p += v * v.adjoint();
            err += l;
        }
    }
    Ok((
        PovmElement::from_matrix_unchecked(linalg::hermitize(&p)),
        err,
    ))
}

/// Greedy adversary: while some effect has error above ε, query the worst
/// one with its exact value as the answer.
pub fn greedy_mistakes(
    target: &DensityMatrix,
    eps: f64,
    eta: f64,
    max_updates: usize,
) -> Result<MistakeRun> {
    let mut h = online_learn(target.dim(), eta)?;
    loop {
        let (effect, err) = worst_effect(target, h.sigma())?;
        if err <= eps || h.update_count() >= max_updates {
            return Ok(MistakeRun {
                dim: target.dim(),
                eps,
                eta,
                updates: h.update_count(),
                final_error: err,
                converged: err <= eps,
            });
        }
        let b = effect.expectation(target)?;
        h.update(&effect, b)?;
    }
}

/// Haar-random pure target, the hardest case for the greedy stream.
pub fn greedy_mistakes_random<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    eps: f64,
    eta: f64,
) -> Result<MistakeRun> {
    let target = crate::quantum::random::haar_state(rng, vec![d]).to_density();
    greedy_mistakes(&target, eps, eta, 100 * default_update_cap(d, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::PureState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn starts_maximally_mixed() {
        let h = online_learn(4, 0.1).unwrap();
        assert!(
            (h.sigma().matrix() - CMatrix::identity(4, 4) * C64::new(0.25, 0.0)).norm() < 1e-15
        );
        assert!(online_learn(1, 0.1).is_err());
    }

    #[test]
    fn update_moves_toward_answer() {
        let h = online_learn(2, 0.1).unwrap();
        let e = PovmElement::projector(&PureState::zero());
        let h1 = online_update(&h, &e, 1.0).unwrap();
        assert!(h1.predict(&e).unwrap() > 0.5);
        assert_eq!(h1.update_count(), 1);
        let expect = linalg::hermitian_exp(h1.loss_accumulator(), -0.1, true);
        assert!((expect - h1.sigma().matrix()).norm() < 1e-12);
    }

    #[test]
    fn greedy_stream_converges_under_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let run = greedy_mistakes_random(&mut rng, 2, 0.3, default_eta(0.3)).unwrap();
        assert!(run.converged);
        assert!(run.updates <= mistake_bound(2, 0.3));
    }
}
