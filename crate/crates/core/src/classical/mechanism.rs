use serde::{Deserialize, Serialize};

use super::distribution::{bit, FiniteDistribution};
use super::laplace::DiscreteLaplace;
use crate::error::{invalid_arg, Error, Result};

/// A conditional output distribution Pr[y | x] over `n`-bit inputs with an
/// enumerable output set.
pub trait OutputKernel: Sync {
    fn num_bits(&self) -> usize;

    fn outputs(&self) -> Vec<i64>;

    fn prob(&self, x: u64, y: i64) -> f64;

    fn row(&self, x: u64) -> Vec<f64> {
        self.outputs()
            .into_iter()
            .map(|y| self.prob(x, y))
            .collect()
    }

    /// Pr[y | weight w] when the kernel depends on `x` only through its
    /// Hamming weight.
    fn weight_prob(&self, _w: usize, _y: i64) -> Option<f64> {
        None
    }

    fn is_symmetric(&self) -> bool {
        self.weight_prob(0, 0).is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalMechanism {
    /// Always outputs 0.
    Constant { n: usize },
    /// Outputs the input bit string.
    Identity { n: usize },
    /// Hamming weight plus discrete Laplace noise, clamped to [−C, n+C].
    NoisyCount { n: usize, noise: DiscreteLaplace },
    /// Each bit reported correctly with probability 1/2 + β.
    RandomizedResponse { n: usize, beta: f64 },
}

impl ClassicalMechanism {
    pub fn noisy_count(n: usize, sigma: f64) -> Result<Self> {
        Ok(Self::NoisyCount {
            n,
            noise: DiscreteLaplace::new(sigma)?,
        })
    }

    pub fn randomized_response(n: usize, beta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&beta) {
            return Err(invalid_arg(format!("β must lie in [0, 1/2), got {beta}")));
        }
        check_bits(n)?;
        Ok(Self::RandomizedResponse { n, beta })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_bits(n)?;
        Ok(Self::Identity { n })
    }

    /// The output distribution for input `x`.
    pub fn distribution(&self, x: u64) -> Result<FiniteDistribution> {
        FiniteDistribution::normalized(self.outputs(), self.row(x))
    }
}

fn check_bits(n: usize) -> Result<()> {
    if n > 20 {
        Err(Error::TooLarge(n))
    } else {
        Ok(())
    }
}

impl OutputKernel for ClassicalMechanism {
    fn num_bits(&self) -> usize {
        match *self {
            Self::Constant { n }
            | Self::Identity { n }
            | Self::NoisyCount { n, .. }
            | Self::RandomizedResponse { n, .. } => n,
        }
    }

    fn outputs(&self) -> Vec<i64> {
        match self {
            Self::Constant { .. } => vec![0],
            Self::Identity { n } | Self::RandomizedResponse { n, .. } => (0..1i64 << n).collect(),
            Self::NoisyCount { n, noise } => noise.count_outputs(*n).collect(),
        }
    }

    fn prob(&self, x: u64, y: i64) -> f64 {
        match self {
            Self::Constant { .. } => f64::from(y == 0),
            Self::Identity { .. } => f64::from(y == x as i64),
            Self::NoisyCount { n, noise } => {
                noise.clamped_count_kernel(*n, x.count_ones() as usize, y)
            }
            Self::RandomizedResponse { n, beta } => {
                if y < 0 || y >= 1 << n {
                    return 0.0;
                }
                let flips = (x ^ y as u64).count_ones() as i32;
                (0.5 + beta).powi(*n as i32 - flips) * (0.5 - beta).powi(flips)
            }
        }
    }

    fn weight_prob(&self, w: usize, y: i64) -> Option<f64> {
        match self {
            Self::Constant { .. } => Some(f64::from(y == 0)),
            Self::NoisyCount { n, noise } => Some(noise.clamped_count_kernel(*n, w, y)),
            _ => None,
        }
    }
}

/// Noisy count on the output window using the untruncated pmf. Rows carry
/// slightly less than unit mass; the log-ratios are exactly ±1/σ wherever
/// the output lies outside [0, n].
#[derive(Clone, Debug)]
pub struct UntruncatedNoisyCount {
    pub n: usize,
    pub noise: DiscreteLaplace,
}

impl OutputKernel for UntruncatedNoisyCount {
    fn num_bits(&self) -> usize {
        self.n
    }

    fn outputs(&self) -> Vec<i64> {
        self.noise.count_outputs(self.n).collect()
    }

    fn prob(&self, x: u64, y: i64) -> f64 {
        self.noise.pmf_untruncated(y - x.count_ones() as i64)
    }

    fn weight_prob(&self, w: usize, y: i64) -> Option<f64> {
        Some(self.noise.pmf_untruncated(y - w as i64))
    }
}

/// Pairs (x, x with bit i set) for every x with bit i clear.
pub fn bit_flip_neighbors(n: usize) -> impl Iterator<Item = (u64, u64)> {
    (0..1u64 << n).flat_map(move |x| {
        (0..n)
            .filter(move |&i| !bit(x, n, i))
            .map(move |i| (x, x | (1 << (n - 1 - i))))
    })
}

/// |ln(a/b)|, skipping 0/0 and infinite for 0/positive.
fn abs_log_ratio(a: f64, b: f64) -> Option<f64> {
    match (a > 0.0, b > 0.0) {
        (false, false) => None,
        (true, true) => Some((a / b).ln().abs()),
        _ => Some(f64::INFINITY),
    }
}

/// Largest |ln Pr[y|a] − ln Pr[y|b]| over the given pairs and all outputs.
pub fn dp_epsilon<K: OutputKernel + ?Sized>(
    kernel: &K,
    pairs: impl IntoIterator<Item = (u64, u64)>,
) -> f64 {
    let outputs = kernel.outputs();
    let mut worst: f64 = 0.0;
    for (a, b) in pairs {
        for &y in &outputs {
            if let Some(r) = abs_log_ratio(kernel.prob(a, y), kernel.prob(b, y)) {
                worst = worst.max(r);
            }
        }
    }
    worst
}

/// Symmetric kernels: the same supremum computed over adjacent weights.
pub fn dp_epsilon_by_weight<K: OutputKernel + ?Sized>(kernel: &K) -> Option<f64> {
    let n = kernel.num_bits();
    let outputs = kernel.outputs();
    let mut worst: f64 = 0.0;
    for w in 0..n {
        for &y in &outputs {
            if let Some(r) = abs_log_ratio(kernel.weight_prob(w, y)?, kernel.weight_prob(w + 1, y)?)
            {
                worst = worst.max(r);
            }
        }
    }
    Some(worst)
}

/// Smallest ε such that, with y drawn from Pr[·|a], the event
/// ln(Pr[y|a]/Pr[y|b]) > ε has probability at most δ.
pub fn epsilon_delta_quantile<K: OutputKernel + ?Sized>(
    kernel: &K,
    a: u64,
    b: u64,
    delta: f64,
) -> f64 {
    let mut ratios: Vec<(f64, f64)> = kernel
        .outputs()
        .into_iter()
        .filter_map(|y| {
            let (pa, pb) = (kernel.prob(a, y), kernel.prob(b, y));
            (pa > 0.0).then(|| {
                (
                    if pb > 0.0 {
                        (pa / pb).ln()
                    } else {
                        f64::INFINITY
                    },
                    pa,
                )
            })
        })
        .collect();
    ratios.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut excluded = 0.0;
    for &(r, p) in &ratios {
        if excluded + p > delta {
            return r.max(0.0);
        }
        excluded += p;
    }
    0.0
}

/// Bayes rule: Pr[x | y] ∝ Pr[x]·Pr[y | x]. Prior labels are input bit strings.
pub fn posterior<K: OutputKernel + ?Sized>(
    prior: &FiniteDistribution,
    kernel: &K,
    y: i64,
) -> Result<FiniteDistribution> {
    let weights: Vec<f64> = prior
        .iter()
        .map(|(x, p)| p * kernel.prob(x as u64, y))
        .collect();
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroProbability(y));
    }
    FiniteDistribution::normalized(prior.labels().to_vec(), weights)
}

/// Marginal Pr[y] = Σ_x Pr[x]·Pr[y | x].
pub fn marginal<K: OutputKernel + ?Sized>(prior: &FiniteDistribution, kernel: &K, y: i64) -> f64 {
    prior
        .iter()
        .map(|(x, p)| p * kernel.prob(x as u64, y))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbor_count() {
        assert_eq!(bit_flip_neighbors(4).count(), 4 * 8);
        assert!(bit_flip_neighbors(3).all(|(a, b)| (a ^ b).count_ones() == 1 && b > a));
    }

    #[test]
    fn constant_mechanism_is_zero_dp() {
        let m = ClassicalMechanism::Constant { n: 3 };
        assert_eq!(dp_epsilon(&m, bit_flip_neighbors(3)), 0.0);
    }

    #[test]
    fn randomized_response_dp() {
        let m = ClassicalMechanism::randomized_response(2, 0.25).unwrap();
        let eps = dp_epsilon(&m, bit_flip_neighbors(2));
        assert!((eps - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_is_not_private() {
        let m = ClassicalMechanism::identity(2).unwrap();
        assert_eq!(dp_epsilon(&m, bit_flip_neighbors(2)), f64::INFINITY);
    }

    #[test]
    fn noisy_count_dp_paths_agree() {
        let m = ClassicalMechanism::noisy_count(5, 2.0).unwrap();
        let a = dp_epsilon(&m, bit_flip_neighbors(5));
        let b = dp_epsilon_by_weight(&m).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a <= 0.5 + 1e-9);
    }

    #[test]
    fn posterior_examples() {
        let prior = FiniteDistribution::uniform((0..4).collect()).unwrap();
        let post = posterior(&prior, &ClassicalMechanism::Constant { n: 2 }, 0).unwrap();
        assert_eq!(post, prior);
        let post = posterior(&prior, &ClassicalMechanism::Identity { n: 2 }, 2).unwrap();
        assert_eq!(post.prob(2), 1.0);
        assert!(posterior(&prior, &ClassicalMechanism::Identity { n: 2 }, 9).is_err());
    }

    #[test]
    fn quantile_is_monotone_in_delta() {
        let m = ClassicalMechanism::noisy_count(4, 1.0).unwrap();
        let e0 = epsilon_delta_quantile(&m, 0, 1, 0.0);
        let e1 = epsilon_delta_quantile(&m, 0, 1, 0.3);
        let e2 = epsilon_delta_quantile(&m, 0, 1, 0.7);
        assert!((e0 - 1.0).abs() < 1e-12);
        assert!(e0 >= e1 && e1 >= e2);
    }
}
