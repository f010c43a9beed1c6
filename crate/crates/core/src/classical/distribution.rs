use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// A probability distribution over integer-labelled outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    labels: Vec<i64>,
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(labels: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        Self::validate_shape(&labels, &probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { labels, probs })
    }

    /// Divides by the total mass before validating.
    pub fn normalized(labels: Vec<i64>, mut probs: Vec<f64>) -> Result<Self> {
        Self::validate_shape(&labels, &probs)?;
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "total mass {total} cannot be normalised"
            )));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { labels, probs })
    }

    /// Outcomes `0..probs.len()`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        Self::new((0..probs.len() as i64).collect(), probs)
    }

    pub fn point_mass(label: i64) -> Self {
        Self {
            labels: vec![label],
            probs: vec![1.0],
        }
    }

    pub fn uniform(labels: Vec<i64>) -> Result<Self> {
        let k = labels.len();
        Self::new(labels, vec![1.0 / k as f64; k])
    }

    fn validate_shape(labels: &[i64], probs: &[f64]) -> Result<()> {
        if labels.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: probs.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::Empty("distribution with no outcomes"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid probability {p}")));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        if let Some(dup) = labels.iter().find(|l| !seen.insert(**l)) {
            return Err(Error::InvalidArgument(format!("duplicate label {dup}")));
        }
        Ok(())
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.labels.iter().copied().zip(self.probs.iter().copied())
    }

    /// Probability of `label`, zero if absent.
    pub fn prob(&self, label: i64) -> f64 {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(l, p)| l as f64 * p).sum()
    }

    /// Inverse-CDF sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (l, p) in self.iter() {
            acc += p;
            if u < acc {
                return l;
            }
        }
        // Rounding left `acc` just below 1: take the last outcome with mass.
        self.iter()
            .filter(|&(_, p)| p > 0.0)
            .last()
            .map(|(l, _)| l)
            .unwrap_or(self.labels[0])
    }

    fn as_map(&self) -> BTreeMap<i64, f64> {
        self.iter().collect()
    }
}

/// Probability pairs over the union of both supports, in label order.
fn aligned(a: &FiniteDistribution, b: &FiniteDistribution) -> Vec<(f64, f64)> {
    let (ma, mb) = (a.as_map(), b.as_map());
    let mut keys: Vec<i64> = ma.keys().chain(mb.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|k| {
            (
                ma.get(k).copied().unwrap_or(0.0),
                mb.get(k).copied().unwrap_or(0.0),
            )
        })
        .collect()
}

/// KL(a ‖ b) in nats; `+∞` if `a` has mass where `b` has none.
pub fn kl(a: &FiniteDistribution, b: &FiniteDistribution) -> f64 {
    kl_pairs(aligned(a, b))
}

pub(crate) fn kl_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut total = 0.0;
    for (p, q) in pairs {
        if p > 0.0 {
            if q <= 0.0 {
                return f64::INFINITY;
            }
            total += p * (p / q).ln();
        }
    }
    total.max(0.0)
}

/// 1 − Σ √(pq).
pub fn hellinger_sq(a: &FiniteDistribution, b: &FiniteDistribution) -> f64 {
    let bc: f64 = aligned(a, b).iter().map(|(p, q)| (p * q).sqrt()).sum();
    (1.0 - bc).clamp(0.0, 1.0)
}

/// Half the ℓ1 distance.
pub fn total_variation(a: &FiniteDistribution, b: &FiniteDistribution) -> f64 {
    let l1: f64 = aligned(a, b).iter().map(|(p, q)| (p - q).abs()).sum();
    (0.5 * l1).clamp(0.0, 1.0)
}

/// Independent bits; `p[i]` is the probability that bit `i` is 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductBernoulli {
    p: Vec<f64>,
}

impl ProductBernoulli {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidArgument(format!(
                "bit probability {x} outside [0, 1]"
            )));
        }
        Ok(Self { p })
    }

    pub fn iid(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// Probability of the bit string `x`; bit `i` is `x`'s bit `n-1-i`.
    pub fn prob(&self, x: u64) -> f64 {
        let n = self.n();
        self.p
            .iter()
            .enumerate()
            .map(|(i, &pi)| if bit(x, n, i) { pi } else { 1.0 - pi })
            .product()
    }

    /// Full distribution over the 2^n bit strings.
    pub fn enumerate(&self) -> Result<FiniteDistribution> {
        let n = self.n();
        if n > 24 {
            return Err(Error::TooLarge(n));
        }
        let labels: Vec<i64> = (0..1i64 << n).collect();
        let probs = labels.iter().map(|&x| self.prob(x as u64)).collect();
        FiniteDistribution::normalized(labels, probs)
    }
}

/// Bit of register `i` in an `n`-bit string (register 0 is most significant).
pub fn bit(x: u64, n: usize, i: usize) -> bool {
    (x >> (n - 1 - i)) & 1 == 1
}

/// Generalised binomial pmf of the number of ones, by convolution.
pub fn hamming_weight_pmf(p: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &pi in p {
        let mut next = vec![0.0; pmf.len() + 1];
        for (w, &q) in pmf.iter().enumerate() {
            next[w] += q * (1.0 - pi);
            next[w + 1] += q * pi;
        }
        pmf = next;
    }
    pmf
}

pub fn hamming_weight_distribution(d: &ProductBernoulli) -> FiniteDistribution {
    let pmf = hamming_weight_pmf(d.p());
    FiniteDistribution::normalized((0..pmf.len() as i64).collect(), pmf)
        .expect("convolution of Bernoullis is a distribution")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let a = FiniteDistribution::from_probs(vec![0.5, 0.5]).unwrap();
        let b = FiniteDistribution::from_probs(vec![0.75, 0.25]).unwrap();
        assert_eq!(kl(&a, &a), 0.0);
        let oracle = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((kl(&a, &b) - oracle).abs() < 1e-15);
        assert!((kl(&a, &b) - 0.1438410).abs() < 1e-7);
        assert_eq!(kl(&a, &FiniteDistribution::point_mass(0)), f64::INFINITY);
    }

    #[test]
    fn hellinger_and_tv_extremes() {
        let a = FiniteDistribution::point_mass(1);
        let b = FiniteDistribution::point_mass(2);
        assert!((hellinger_sq(&a, &b) - 1.0).abs() < 1e-15);
        assert!((total_variation(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(hellinger_sq(&a, &a), 0.0);
        assert_eq!(total_variation(&a, &a), 0.0);
    }

    #[test]
    fn validation() {
        assert!(FiniteDistribution::new(vec![0, 0], vec![0.5, 0.5]).is_err());
        assert!(FiniteDistribution::new(vec![0, 1], vec![0.5, 0.4]).is_err());
        assert!(FiniteDistribution::new(vec![0, 1], vec![1.5, -0.5]).is_err());
        assert!(ProductBernoulli::new(vec![1.2]).is_err());
    }

    #[test]
    fn hamming_examples() {
        let d = hamming_weight_distribution(&ProductBernoulli::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(d.probs(), &[0.25, 0.5, 0.25]);
        let d = hamming_weight_distribution(&ProductBernoulli::new(vec![0.3]).unwrap());
        assert!((d.probs()[0] - 0.7).abs() < 1e-15 && (d.probs()[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn sampling_follows_pmf() {
        use rand::SeedableRng;
        let d = FiniteDistribution::new(vec![-1, 4, 7], vec![0.2, 0.5, 0.3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        for _ in 0..20000 {
            let y = d.sample(&mut rng);
            counts[d.labels().iter().position(|&l| l == y).unwrap()] += 1;
        }
        assert!((counts[1] as f64 / 20000.0 - 0.5).abs() < 0.02);
    }
}
