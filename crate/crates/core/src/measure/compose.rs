//! Randomized response followed by a noisy ±-basis count: the composition
//! whose accuracy breaks down once ε is large compared with n^{-1/4}.

use rand::Rng;
use serde::Serialize;

use super::bounds::canonical_gentle_implementation;
use super::examples::RandomizedResponse;
use crate::classical::DiscreteLaplace;
use crate::error::{invalid_arg, Result};
use crate::quantum::{PovmElement, PureState};

/// M₁ = R_β with β = ε on each register, implemented by the square roots of
/// its effects; M₂ counts |+⟩ outcomes with discrete Laplace noise of scale
/// 1/ε. Inputs are |+⟩^⊗n.
#[derive(Clone, Debug)]
pub struct ComposeFailure {
    eps: f64,
    n: usize,
    /// (Pr[b], Pr[− | b]) for b = 0, 1 on a |+⟩ input.
    branches: [(f64, f64); 2],
    noise: DiscreteLaplace,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComposeTrial {
    pub count: i64,
    pub estimate: f64,
    pub error: f64,
}

impl ComposeFailure {
    pub fn new(eps: f64, n: usize) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(invalid_arg(format!("need 0 < ε < 1/2, got {eps}")));
        }
        if n == 0 {
            return Err(invalid_arg("need at least one register"));
        }
        let rr = RandomizedResponse::new(eps)?;
        let kraus = canonical_gentle_implementation(&rr.povm())?;
        let plus = PureState::plus();
        let minus = PovmElement::projector(&PureState::minus());
        let mut branches = [(0.0, 0.0); 2];
        for (b, op) in kraus.iter().enumerate() {
            let v = &op.kraus_ops()[0] * plus.amplitudes();
            let p = v.norm_squared();
            let post = PureState::normalized(v, vec![2])?;
            branches[b] = (p, minus.expectation_pure(&post)?);
        }
        Ok(Self {
            eps,
            n,
            branches,
            noise: DiscreteLaplace::new(1.0 / eps)?,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Per-register probability that a |+⟩ reads as |−⟩ after M₁.
    pub fn flip_probability(&self) -> f64 {
        self.branches.iter().map(|(p, m)| p * m).sum()
    }

    /// Standard deviation of M₂'s noise: the error without M₁.
    pub fn noise_floor(&self) -> f64 {
        self.noise.std_dev()
    }

    /// One run: per register draw M₁'s outcome and then the ± outcome of
    /// the post-state; add noise to the |+⟩ count and debias by the flip
    /// probability δ via (y − δn)/(1 − 2δ).
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> ComposeTrial {
        let mut plus = 0i64;
        for _ in 0..self.n {
            let (p0, m0) = self.branches[0];
            let flip = if rng.random::<f64>() < p0 {
                m0
            } else {
                self.branches[1].1
            };
            if rng.random::<f64>() >= flip {
                plus += 1;
            }
        }
        let count = plus + self.noise.sample(rng);
        let delta = self.flip_probability();
        let estimate = (count as f64 - delta * self.n as f64) / (1.0 - 2.0 * delta);
        ComposeTrial {
            count,
            estimate,
            error: estimate - self.n as f64,
        }
    }
}
