use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distribution::{hamming_weight_pmf, kl_pairs, ProductBernoulli};
use super::mechanism::OutputKernel;
use crate::error::{Error, Result};

/// Largest n for which the audit enumerates all 2^n inputs.
pub const MAX_ENUMERATION_BITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditPath {
    /// Hamming-weight path when the kernel is symmetric, else enumeration.
    Auto,
    Enumerate,
    HammingWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub y: i64,
    pub prob: f64,
    pub kl: f64,
    pub tv: f64,
    pub hellinger_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: usize,
    pub eps: f64,
    pub path: AuditPath,
    /// 2ε²n.
    pub kl_bound: f64,
    /// 2ε√n.
    pub tv_bound: f64,
    pub rows: Vec<AuditRow>,
    pub max_kl: f64,
    pub max_tv: f64,
    pub kl_ok: bool,
    pub tv_ok: bool,
}

/// Divergences between the posterior D_y and the prior D for every outcome
/// of positive probability, checked against 2ε²n and 2ε√n.
pub fn posterior_kl_audit<K: OutputKernel + ?Sized>(
    d: &ProductBernoulli,
    kernel: &K,
    eps: f64,
    path: AuditPath,
) -> Result<AuditReport> {
    let n = d.n();
    if kernel.num_bits() != n {
        return Err(Error::DimensionMismatch {
            expected: kernel.num_bits(),
            got: n,
        });
    }
    let path = match path {
        AuditPath::Auto if kernel.is_symmetric() => AuditPath::HammingWeight,
        AuditPath::Auto => AuditPath::Enumerate,
        p => p,
    };
    let rows = match path {
        AuditPath::HammingWeight => {
            if !kernel.is_symmetric() {
                return Err(Error::InvalidArgument(
                    "Hamming-weight audit needs a symmetric kernel".into(),
                ));
            }
            by_weight(d, kernel)
        }
        _ => {
            if n > MAX_ENUMERATION_BITS {
                return Err(Error::TooLarge(n));
            }
            by_enumeration(d, kernel)
        }
    };
    let kl_bound = 2.0 * eps * eps * n as f64;
    let tv_bound = 2.0 * eps * (n as f64).sqrt();
    let max_kl = rows.iter().map(|r| r.kl).fold(0.0, f64::max);
    let max_tv = rows.iter().map(|r| r.tv).fold(0.0, f64::max);
    Ok(AuditReport {
        n,
        eps,
        path,
        kl_bound,
        tv_bound,
        max_kl,
        max_tv,
        kl_ok: max_kl <= kl_bound + 1e-12,
        tv_ok: max_tv <= tv_bound + 1e-12,
        rows,
    })
}

/// Divergences of a reweighting D_y(x) = D(x)·r(x) from D, given the pairs
/// (D(x), r(x)) with Σ D(x) r(x) = 1.
fn reweighting_row(y: i64, prob: f64, pairs: impl Iterator<Item = (f64, f64)> + Clone) -> AuditRow {
    let kl = kl_pairs(pairs.clone().map(|(p, r)| (p * r, p)));
    let tv = 0.5 * pairs.clone().map(|(p, r)| p * (r - 1.0).abs()).sum::<f64>();
    let bc: f64 = pairs.map(|(p, r)| p * r.sqrt()).sum();
    AuditRow {
        y,
        prob,
        kl,
        tv: tv.clamp(0.0, 1.0),
        hellinger_sq: (1.0 - bc).clamp(0.0, 1.0),
    }
}

fn by_weight<K: OutputKernel + ?Sized>(d: &ProductBernoulli, kernel: &K) -> Vec<AuditRow> {
    let b = hamming_weight_pmf(d.p());
    kernel
        .outputs()
        .into_par_iter()
        .filter_map(|y| {
            let k: Vec<f64> = (0..b.len())
                .map(|w| kernel.weight_prob(w, y).expect("symmetric kernel"))
                .collect();
            let py: f64 = b.iter().zip(&k).map(|(bw, kw)| bw * kw).sum();
            (py > 0.0).then(|| {
                reweighting_row(y, py, b.iter().zip(&k).map(move |(&bw, &kw)| (bw, kw / py)))
            })
        })
        .collect()
}

fn by_enumeration<K: OutputKernel + ?Sized>(d: &ProductBernoulli, kernel: &K) -> Vec<AuditRow> {
    let n = d.n();
    let prior: Vec<f64> = (0..1u64 << n).map(|x| d.prob(x)).collect();
    kernel
        .outputs()
        .into_par_iter()
        .filter_map(|y| {
            let k: Vec<f64> = (0..1u64 << n).map(|x| kernel.prob(x, y)).collect();
            let py: f64 = prior.iter().zip(&k).map(|(p, kx)| p * kx).sum();
            (py > 0.0).then(|| {
                reweighting_row(
                    y,
                    py,
                    prior.iter().zip(&k).map(move |(&p, &kx)| (p, kx / py)),
                )
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::ClassicalMechanism;

    #[test]
    fn constant_mechanism_has_zero_divergence() {
        let d = ProductBernoulli::iid(5, 0.3).unwrap();
        let r = posterior_kl_audit(
            &d,
            &ClassicalMechanism::Constant { n: 5 },
            0.0,
            AuditPath::Enumerate,
        )
        .unwrap();
        assert!(r.max_kl < 1e-14);
        assert!(r.kl_ok && r.tv_ok);
    }

    #[test]
    fn l1_on_four_uniform_bits() {
        let d = ProductBernoulli::iid(4, 0.5).unwrap();
        let m = ClassicalMechanism::noisy_count(4, 1.0).unwrap();
        let r = posterior_kl_audit(&d, &m, 1.0, AuditPath::Auto).unwrap();
        assert_eq!(r.path, AuditPath::HammingWeight);
        assert!(r.max_kl <= 8.0);
        let total: f64 = r.rows.iter().map(|row| row.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hamming_path_requires_symmetry() {
        let d = ProductBernoulli::iid(2, 0.5).unwrap();
        let m = ClassicalMechanism::randomized_response(2, 0.1).unwrap();
        assert!(posterior_kl_audit(&d, &m, 0.4, AuditPath::HammingWeight).is_err());
        assert_eq!(
            posterior_kl_audit(&d, &m, 0.4, AuditPath::Auto)
                .unwrap()
                .path,
            AuditPath::Enumerate
        );
    }
}
