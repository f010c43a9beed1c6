use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::linalg;
use crate::quantum::{check_povm_complete, PovmElement, QuantumOperation};

/// Eigenvalues at or below this are treated as zero.
pub const TRIVIALITY_FLOOR: f64 = 1e-12;

/// ln(λ_max/λ_min) of E, or +∞ if E is (numerically) singular.
pub fn triviality_epsilon(e: &PovmElement) -> f64 {
    let eig = e.eigenvalues();
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if lo <= TRIVIALITY_FLOOR {
        f64::INFINITY
    } else {
        (hi / lo).ln()
    }
}

/// B_i = U_i†√D_i U_i, the principal square root of each effect.
pub fn canonical_gentle_implementation(povm: &[PovmElement]) -> Result<Vec<QuantumOperation>> {
    check_povm_complete(povm)?;
    Ok(povm
        .iter()
        .map(|e| QuantumOperation::from_kraus_unchecked(vec![linalg::psd_sqrt(e.matrix())]))
        .collect())
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid_arg(format!(
            "{name} must be finite and nonnegative, got {x}"
        )));
    }
    Ok(())
}

/// ln((1+4α)/(1−4α)): DP on product states of an α-gentle measurement.
pub fn gentle_to_dp(alpha: f64) -> Result<f64> {
    check_nonneg("α", alpha)?;
    if alpha >= 0.25 {
        return Err(invalid_arg(format!("α must be below 1/4, got {alpha}")));
    }
    Ok(((1.0 + 4.0 * alpha) / (1.0 - 4.0 * alpha)).ln())
}

/// 2√2·ε√n: gentleness on product states of an ε-DP product measurement.
pub fn dp_to_gentle(eps: f64, n: usize) -> Result<f64> {
    check_nonneg("ε", eps)?;
    Ok(2.0 * std::f64::consts::SQRT_2 * eps * (n as f64).sqrt())
}

/// e^ε − 1.
pub fn trivial_to_gentle(eps: f64) -> Result<f64> {
    check_nonneg("ε", eps)?;
    Ok(eps.exp_m1())
}

/// 2εn.
pub fn dp_to_trivial(eps: f64, n: usize) -> Result<f64> {
    check_nonneg("ε", eps)?;
    Ok(2.0 * eps * n as f64)
}

/// Sequential composition: (relative accuracy Σα/p, ε′ = Σε + ln((p+Σα)/(p−Σα))).
pub fn compose_dp(eps: &[f64], alphas: &[f64], p: f64) -> Result<(f64, f64)> {
    for &e in eps {
        check_nonneg("ε_i", e)?;
    }
    for &a in alphas {
        check_nonneg("α_i", a)?;
    }
    let sa: f64 = alphas.iter().sum();
    if !(p > sa) || p > 1.0 {
        return Err(invalid_arg(format!("need Σα = {sa} < p ≤ 1, got p = {p}")));
    }
    let se: f64 = eps.iter().sum();
    Ok((sa / p, se + ((p + sa) / (p - sa)).ln()))
}

/// β = ln((1 + (e^ε−1)/δ)/(1 − (1−e^{−ε})/δ)) with δ = (√2·d)^{−n}, for an
/// ε-trivial-on-product-states measurement on n registers of dimension d.
pub fn triviality_transfer(eps: f64, d: usize, n: usize) -> Result<f64> {
    check_nonneg("ε", eps)?;
    if d < 2 {
        return Err(invalid_arg(format!(
            "register dimension must be at least 2, got {d}"
        )));
    }
    let delta = (std::f64::consts::SQRT_2 * d as f64).powi(-(n as i32));
    if eps > delta / 2.0 {
        return Err(invalid_arg(format!(
            "ε = {eps} exceeds δ/2 = {}",
            delta / 2.0
        )));
    }
    Ok(((1.0 + eps.exp_m1() / delta) / (1.0 - (-(-eps).exp_m1()) / delta)).ln())
}

/// A bound calculator and its arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    GentleToDp {
        alpha: f64,
    },
    DpToGentle {
        eps: f64,
        n: usize,
    },
    TrivialToGentle {
        eps: f64,
    },
    DpToTrivial {
        eps: f64,
        n: usize,
    },
    ComposeDp {
        eps: Vec<f64>,
        alphas: Vec<f64>,
        p: f64,
    },
    TrivialityTransfer {
        eps: f64,
        d: usize,
        n: usize,
    },
}

impl Bound {
    /// The bound's value; for composition, the composed ε′.
    pub fn evaluate(&self) -> Result<f64> {
        match self {
            Bound::GentleToDp { alpha } => gentle_to_dp(*alpha),
            Bound::DpToGentle { eps, n } => dp_to_gentle(*eps, *n),
            Bound::TrivialToGentle { eps } => trivial_to_gentle(*eps),
            Bound::DpToTrivial { eps, n } => dp_to_trivial(*eps, *n),
            Bound::ComposeDp { eps, alphas, p } => compose_dp(eps, alphas, *p).map(|(_, e)| e),
            Bound::TrivialityTransfer { eps, d, n } => triviality_transfer(*eps, *d, *n),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Bound::GentleToDp { .. } => "gentle_to_dp",
            Bound::DpToGentle { .. } => "dp_to_gentle",
            Bound::TrivialToGentle { .. } => "trivial_to_gentle",
            Bound::DpToTrivial { .. } => "dp_to_trivial",
            Bound::ComposeDp { .. } => "compose_dp",
            Bound::TrivialityTransfer { .. } => "triviality_transfer",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{re, CMatrix, CVector};

    fn diag(a: f64, b: f64) -> PovmElement {
        PovmElement::new(CMatrix::from_diagonal(&CVector::from_vec(vec![
            re(a),
            re(b),
        ])))
        .unwrap()
    }

    #[test]
    fn triviality_examples() {
        assert!(triviality_epsilon(&diag(0.5, 0.5)).abs() < 1e-12);
        assert!((triviality_epsilon(&diag(0.6, 0.4)) - 1.5f64.ln()).abs() < 1e-12);
        assert_eq!(triviality_epsilon(&diag(1.0, 0.0)), f64::INFINITY);
    }

    #[test]
    fn canonical_roots() {
        let ops = canonical_gentle_implementation(&[diag(0.6, 0.4), diag(0.4, 0.6)]).unwrap();
        let b = &ops[0].kraus_ops()[0];
        assert!(
            (b[(0, 0)].re - 0.6f64.sqrt()).abs() < 1e-12
                && (b[(1, 1)].re - 0.4f64.sqrt()).abs() < 1e-12
        );
        let proj = canonical_gentle_implementation(&[diag(1.0, 0.0), diag(0.0, 1.0)]).unwrap();
        assert!((proj[1].kraus_ops()[0][(1, 1)].re - 1.0).abs() < 1e-12);
        assert!(canonical_gentle_implementation(&[diag(0.6, 0.4)]).is_err());
    }

    #[test]
    fn calculator_values() {
        assert_eq!(gentle_to_dp(0.0).unwrap(), 0.0);
        assert!((gentle_to_dp(0.1).unwrap() - (1.4f64 / 0.6).ln()).abs() < 1e-15);
        assert!((gentle_to_dp(0.1).unwrap() - 0.847298).abs() < 1e-6);
        assert!(gentle_to_dp(0.25).is_err());
        assert!((dp_to_gentle(0.01, 100).unwrap() - 0.282843).abs() < 1e-6);
        assert!((trivial_to_gentle(0.3).unwrap() - (0.3f64.exp() - 1.0)).abs() < 1e-15);
        assert!((dp_to_trivial(0.1, 7).unwrap() - 1.4).abs() < 1e-15);
        let (acc, e) = compose_dp(&[0.1, 0.2], &[0.01, 0.02], 0.5).unwrap();
        assert!((acc - 0.06).abs() < 1e-15);
        assert!((e - (0.3 + (0.53f64 / 0.47).ln())).abs() < 1e-15);
        assert!(compose_dp(&[0.1], &[0.6], 0.5).is_err());
    }

    #[test]
    fn transfer_is_order_eps_over_delta() {
        let delta = (std::f64::consts::SQRT_2 * 2.0).powi(-3);
        let eps = delta / 100.0;
        let b = triviality_transfer(eps, 2, 3).unwrap();
        assert!(b > 0.0 && (b / (2.0 * eps / delta) - 1.0).abs() < 0.05);
        assert!(triviality_transfer(delta, 2, 3).is_err());
    }
}
