use crate::error::{invalid_arg, Result};

/// Outcome-probability and damage bounds for a sequence of conditioned operations with
/// isolated damages ε_i and acceptance probabilities q_i:
/// |p_T − q_T| ≤ Σε_i / Π_{i∉T} q_i and final damage ≤ (2/Π q_i)·Σε_i.
pub fn damage_bounds(eps: &[f64], q: &[f64], subset: &[usize]) -> Result<(f64, f64)> {
    if eps.len() != q.len() {
        return Err(invalid_arg("ε and q lists differ in length"));
    }
    if let Some(&bad) = q.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(invalid_arg(format!(
            "acceptance probability {bad} not in (0, 1]"
        )));
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= q.len()) {
        return Err(invalid_arg(format!("subset index {i} out of range")));
    }
    let total: f64 = eps.iter().sum();
    let outside: f64 = (0..q.len())
        .filter(|i| !subset.contains(i))
        .map(|i| q[i])
        .product();
    let all: f64 = q.iter().product();
    Ok((total / outside, 2.0 * total / all))
}

/// 1-based rounds closing each epoch: an epoch ends at its first update or
/// once Π(1 − λ_j) since its start is at most 1/2. The last round always
/// closes an epoch.
pub fn epoch_segmentation(lambdas: &[f64], updates: &[bool]) -> Result<Vec<usize>> {
    if lambdas.len() != updates.len() {
        return Err(invalid_arg("λ and update lists differ in length"));
    }
    let mut ends = Vec::new();
    let mut prod = 1.0;
    for (t, (&l, &u)) in lambdas.iter().zip(updates).enumerate() {
        if !(0.0..=1.0).contains(&l) {
            return Err(invalid_arg(format!("λ = {l} outside [0, 1]")));
        }
        prod *= 1.0 - l;
        if u || prod <= 0.5 || t + 1 == lambdas.len() {
            ends.push(t + 1);
            prod = 1.0;
        }
    }
    Ok(ends)
}

/// 1 − Π(1 − λ_j): the chance an epoch with these ideal-state update
/// probabilities sees at least one update.
pub fn epoch_update_probability(lambdas: &[f64]) -> f64 {
    1.0 - lambdas.iter().map(|l| 1.0 - l).product::<f64>()
}
