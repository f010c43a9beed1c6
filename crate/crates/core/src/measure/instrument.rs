use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::count::{NoisyCountMeasurement, MIN_OUTCOME_PROB};
use crate::classical::FiniteDistribution;
use crate::error::{invalid_arg, Error, Result};
use crate::quantum::{
    apply_and_condition, apply_operation, check_povm_complete, trace_distance, PovmElement,
    PureState, QuantumOperation, State,
};

/// A measurement together with its post-measurement states.
pub trait Instrument {
    fn outcome_dist(&self, state: &State) -> Result<FiniteDistribution>;

    /// State conditioned on outcome `y`.
    fn post_state(&self, state: &State, y: i64) -> Result<State>;

    /// Trace distance between `state` and its post-measurement state.
    fn damage(&self, state: &State, y: i64) -> Result<f64> {
        trace_distance(&self.post_state(state, y)?, state)
    }
}

impl Instrument for NoisyCountMeasurement {
    fn outcome_dist(&self, state: &State) -> Result<FiniteDistribution> {
        NoisyCountMeasurement::outcome_dist(self, state)
    }

    fn post_state(&self, state: &State, y: i64) -> Result<State> {
        Ok(self.condition(state, y)?.0)
    }

    fn damage(&self, state: &State, y: i64) -> Result<f64> {
        match state {
            State::Pure(p) => self.damage_pure(p, y),
            State::Mixed(_) => trace_distance(&self.post_state(state, y)?, state),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDamage {
    pub y: i64,
    pub prob: f64,
    pub damage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GentlenessProfile {
    pub per_outcome: Vec<OutcomeDamage>,
    /// Largest damage over the listed outcomes.
    pub alpha: f64,
    /// (level, Pr[damage > level]) at every distinct damage level.
    pub delta_curve: Vec<(f64, f64)>,
}

impl GentlenessProfile {
    fn from_outcomes(per_outcome: Vec<OutcomeDamage>) -> Self {
        let alpha = per_outcome.iter().map(|o| o.damage).fold(0.0, f64::max);
        let mut levels: Vec<f64> = per_outcome.iter().map(|o| o.damage).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let delta_curve = levels
            .iter()
            .map(|&l| {
                (
                    l,
                    per_outcome
                        .iter()
                        .filter(|o| o.damage > l)
                        .map(|o| o.prob)
                        .sum(),
                )
            })
            .collect();
        Self {
            per_outcome,
            alpha,
            delta_curve,
        }
    }

    /// Smallest listed level whose exceedance probability is at most δ.
    pub fn alpha_at(&self, delta: f64) -> f64 {
        self.delta_curve
            .iter()
            .find(|(_, p)| *p <= delta)
            .map_or(self.alpha, |(l, _)| *l)
    }

    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for o in &self.per_outcome {
            out.push_str(&serde_json::to_string(o)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeSelection {
    /// Every outcome with positive probability.
    Exhaustive,
    /// Outcomes drawn from the outcome distribution; probabilities are
    /// empirical frequencies.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Damage of a single outcome; errors if the outcome is impossible.
pub fn outcome_damage<I: Instrument + ?Sized>(
    inst: &I,
    state: &State,
    y: i64,
) -> Result<OutcomeDamage> {
    let prob = inst.outcome_dist(state)?.prob(y);
    if prob < MIN_OUTCOME_PROB {
        return Err(Error::ZeroProbability(y));
    }
    Ok(OutcomeDamage {
        y,
        prob,
        damage: inst.damage(state, y)?,
    })
}

pub fn gentleness_profile<I: Instrument + ?Sized>(
    inst: &I,
    state: &State,
    selection: OutcomeSelection,
) -> Result<GentlenessProfile> {
    let dist = inst.outcome_dist(state)?;
    let per_outcome = match selection {
        OutcomeSelection::Exhaustive => dist
            .iter()
            .filter(|&(_, p)| p >= MIN_OUTCOME_PROB)
            .map(|(y, prob)| {
                Ok(OutcomeDamage {
                    y,
                    prob,
                    damage: inst.damage(state, y)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        OutcomeSelection::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(invalid_arg("Monte-Carlo profile needs at least one sample"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for _ in 0..samples {
                *counts
                    .entry(super::count::sample_possible(&dist, &mut rng)?)
                    .or_default() += 1;
            }
            counts
                .into_iter()
                .map(|(y, c)| {
                    Ok(OutcomeDamage {
                        y,
                        prob: c as f64 / samples as f64,
                        damage: inst.damage(state, y)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(GentlenessProfile::from_outcomes(per_outcome))
}

/// An instrument given by one quantum operation per outcome `0..k`.
#[derive(Clone, Debug)]
pub struct KrausInstrument {
    ops: Vec<QuantumOperation>,
}

impl KrausInstrument {
    /// Requires Σ_i Σ_j B_ij†B_ij = I.
    pub fn new(ops: Vec<QuantumOperation>) -> Result<Self> {
        let effects: Vec<PovmElement> = ops.iter().map(QuantumOperation::effect).collect();
        check_povm_complete(&effects)?;
        Ok(Self { ops })
    }

    pub fn ops(&self) -> &[QuantumOperation] {
        &self.ops
    }

    fn op(&self, y: i64) -> Result<&QuantumOperation> {
        usize::try_from(y)
            .ok()
            .and_then(|i| self.ops.get(i))
            .ok_or(Error::ZeroProbability(y))
    }
}

impl Instrument for KrausInstrument {
    fn outcome_dist(&self, state: &State) -> Result<FiniteDistribution> {
        let rho = state.to_density();
        let probs = self
            .ops
            .iter()
            .map(|op| Ok(apply_operation(op, &rho)?.1.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        FiniteDistribution::normalized((0..probs.len() as i64).collect(), probs)
    }

    fn post_state(&self, state: &State, y: i64) -> Result<State> {
        let op = self.op(y)?;
        if let (State::Pure(psi), [b]) = (state, op.kraus_ops()) {
            let v = b * psi.amplitudes();
            return Ok(State::Pure(
                PureState::normalized(v, psi.dims().to_vec())
                    .map_err(|_| Error::ZeroProbability(y))?,
            ));
        }
        let (post, p) =
            apply_and_condition(op, &state.to_density()).map_err(|_| Error::ZeroProbability(y))?;
        if p < MIN_OUTCOME_PROB {
            return Err(Error::ZeroProbability(y));
        }
        Ok(State::Mixed(post))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::PureState;

    #[test]
    fn basis_input_is_undamaged() {
        let m = NoisyCountMeasurement::lsigma(4, 1.0).unwrap();
        let s = State::Pure(PureState::zero().power(4).unwrap());
        let prof = gentleness_profile(&m, &s, OutcomeSelection::Exhaustive).unwrap();
        assert!(prof.alpha < 1e-7);
        let total: f64 = prof.per_outcome.iter().map(|o| o.prob).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let m = NoisyCountMeasurement::lsigma(3, 1.0).unwrap();
        let s = State::Pure(PureState::plus().power(3).unwrap());
        let sel = OutcomeSelection::MonteCarlo {
            samples: 200,
            seed: 9,
        };
        let a = gentleness_profile(&m, &s, sel).unwrap();
        let b = gentleness_profile(&m, &s, sel).unwrap();
        assert_eq!(a, b);
        assert!(a.to_json_lines().unwrap().lines().count() == a.per_outcome.len());
    }

    #[test]
    fn delta_curve_is_decreasing() {
        let m = NoisyCountMeasurement::lsigma(4, 2.0).unwrap();
        let s = State::Pure(PureState::plus().power(4).unwrap());
        let prof = gentleness_profile(&m, &s, OutcomeSelection::Exhaustive).unwrap();
        assert!(prof.delta_curve.windows(2).all(|w| w[0].1 >= w[1].1));
        assert_eq!(prof.delta_curve.last().unwrap().1, 0.0);
        assert!(prof.alpha_at(1.0) <= prof.alpha);
    }

    #[test]
    fn impossible_outcome_is_rejected() {
        let m = NoisyCountMeasurement::lsigma(2, 1.0).unwrap();
        let s = State::Pure(PureState::zero().power(2).unwrap());
        assert!(outcome_damage(&m, &s, 10_000).is_err());
    }
}
