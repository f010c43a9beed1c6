use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

pub const DEFAULT_TAIL_MASS: f64 = 1e-12;

/// Two-sided geometric noise Pr[k] ∝ e^{−|k|/σ}, cut off at |k| ≤ C.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LaplaceSpec", into = "LaplaceSpec")]
pub struct DiscreteLaplace {
    sigma: f64,
    tail_mass: f64,
    cutoff: i64,
    /// Σ_{k∈ℤ} e^{−|k|/σ}.
    z: f64,
    /// Σ_{|k|≤C} e^{−|k|/σ}.
    z_truncated: f64,
    /// e^{−1/σ}.
    r: f64,
}

impl DiscreteLaplace {
    /// C = ⌈σ·ln(2/τ)⌉ + 1, so that the discarded two-sided mass is below τ.
    pub fn build(sigma: f64, tail_mass: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid_arg(format!(
                "noise scale must be positive, got {sigma}"
            )));
        }
        if !(tail_mass > 0.0 && tail_mass < 1.0) {
            return Err(invalid_arg(format!(
                "tail mass must lie in (0, 1), got {tail_mass}"
            )));
        }
        let cutoff = (sigma * (2.0 / tail_mass).ln()).ceil() as i64 + 1;
        if cutoff > 50_000_000 {
            return Err(Error::TooLarge(cutoff as usize));
        }
        let r = (-1.0 / sigma).exp();
        let z = 2.0 / (1.0 - r) - 1.0;
        let z_truncated = z - 2.0 * r.powi((cutoff + 1) as i32) / (1.0 - r);
        Ok(Self {
            sigma,
            tail_mass,
            cutoff,
            z,
            z_truncated,
            r,
        })
    }

    pub fn new(sigma: f64) -> Result<Self> {
        Self::build(sigma, DEFAULT_TAIL_MASS)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Normaliser of the untruncated distribution, 2/(1−e^{−1/σ}) − 1.
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn z_truncated(&self) -> f64 {
        self.z_truncated
    }

    /// Mass the cutoff removes from the untruncated distribution.
    pub fn discarded_mass(&self) -> f64 {
        1.0 - self.z_truncated / self.z
    }

    fn weight(&self, k: i64) -> f64 {
        (-(k.unsigned_abs() as f64) / self.sigma).exp()
    }

    /// Renormalised pmf on {−C, …, C}.
    pub fn pmf(&self, k: i64) -> f64 {
        if k.abs() > self.cutoff {
            0.0
        } else {
            self.weight(k) / self.z_truncated
        }
    }

    /// Untruncated pmf e^{−|k|/σ}/Z.
    pub fn pmf_untruncated(&self, k: i64) -> f64 {
        self.weight(k) / self.z
    }

    /// Untruncated Pr[K ≥ j].
    pub fn upper_tail(&self, j: i64) -> f64 {
        if j <= 0 {
            1.0 - self.upper_tail(1 - j)
        } else {
            self.r.powi(j as i32) / ((1.0 - self.r) * self.z)
        }
    }

    /// Untruncated Pr[K ≤ j].
    pub fn lower_tail(&self, j: i64) -> f64 {
        self.upper_tail(-j)
    }

    /// Support of the truncated pmf.
    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        -self.cutoff..=self.cutoff
    }

    /// Standard deviation of the untruncated distribution, √(2r)/(1−r).
    pub fn std_dev(&self) -> f64 {
        (2.0 * self.r).sqrt() / (1.0 - self.r)
    }

    /// Inverse-CDF sample from the truncated pmf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for k in self.support() {
            acc += self.pmf(k);
            if u < acc {
                return k;
            }
        }
        self.cutoff
    }

    /// Probability that a count `w` out of `n` is reported as `y` once the
    /// noise is added and the result clamped to [−C, n+C]. Interior outputs
    /// follow the untruncated pmf; the two boundary outputs collect the tails.
    pub fn clamped_count_kernel(&self, n: usize, w: usize, y: i64) -> f64 {
        let (lo, hi) = (-self.cutoff, n as i64 + self.cutoff);
        let w = w as i64;
        if y < lo || y > hi {
            0.0
        } else if y == lo {
            self.lower_tail(lo - w)
        } else if y == hi {
            self.upper_tail(hi - w)
        } else {
            self.pmf_untruncated(y - w)
        }
    }

    /// Output window [−C, n+C] of a noisy count over `n` bits.
    pub fn count_outputs(&self, n: usize) -> std::ops::RangeInclusive<i64> {
        -self.cutoff..=n as i64 + self.cutoff
    }
}

#[derive(Serialize, Deserialize)]
struct LaplaceSpec {
    sigma: f64,
    tail_mass: f64,
}

impl From<DiscreteLaplace> for LaplaceSpec {
    fn from(l: DiscreteLaplace) -> Self {
        LaplaceSpec {
            sigma: l.sigma,
            tail_mass: l.tail_mass,
        }
    }
}

impl TryFrom<LaplaceSpec> for DiscreteLaplace {
    type Error = Error;
    fn try_from(s: LaplaceSpec) -> Result<Self> {
        DiscreteLaplace::build(s.sigma, s.tail_mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_one_normaliser() {
        let l = DiscreteLaplace::new(1.0).unwrap();
        let z = 2.0 / (1.0 - (-1.0f64).exp()) - 1.0;
        assert!((l.z() - z).abs() < 1e-15);
        assert!((l.z() - 2.163953).abs() < 1e-6);
        assert!((l.pmf_untruncated(0) - 0.462117).abs() < 1e-6);
        assert!((l.pmf(0) - 1.0 / z).abs() < 1e-11);
    }

    #[test]
    fn cutoff_formula_and_tail() {
        for sigma in [0.5, 1.0, 3.0, 8.0, 40.0] {
            let l = DiscreteLaplace::build(sigma, 1e-6).unwrap();
            assert_eq!(l.cutoff(), (sigma * (2.0f64 / 1e-6).ln()).ceil() as i64 + 1);
            let brute: f64 = (l.cutoff() + 1..l.cutoff() + 20_000)
                .map(|k| 2.0 * l.pmf_untruncated(k))
                .sum();
            assert!(brute < 1e-6);
            assert!((brute - l.discarded_mass()).abs() < 1e-12);
        }
    }

    #[test]
    fn large_sigma_normaliser() {
        let l = DiscreteLaplace::new(100.0).unwrap();
        assert!((l.z() / 199.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn symmetric_and_normalised() {
        let l = DiscreteLaplace::new(2.5).unwrap();
        assert_eq!(l.pmf(3), l.pmf(-3));
        let total: f64 = l.support().map(|k| l.pmf(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tails_match_sums() {
        let l = DiscreteLaplace::new(1.7).unwrap();
        for j in [-5, -1, 0, 1, 4] {
            let brute: f64 = (j..j + 5000).map(|k| l.pmf_untruncated(k)).sum();
            assert!((l.upper_tail(j) - brute).abs() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn clamped_kernel_rows_sum_to_one() {
        let l = DiscreteLaplace::new(2.0).unwrap();
        for w in 0..=6 {
            let total: f64 = l
                .count_outputs(6)
                .map(|y| l.clamped_count_kernel(6, w, y))
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(DiscreteLaplace::new(0.0).is_err());
        assert!(DiscreteLaplace::new(-1.0).is_err());
        assert!(DiscreteLaplace::build(1.0, 1.5).is_err());
    }
}
