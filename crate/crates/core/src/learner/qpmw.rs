//! The private multiplicative weights driver for online shadow tomography.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::effect::QubitEffect;
use super::mmw::{default_eta, default_update_cap, online_learn, HypothesisState};
use crate::classical::{hamming_weight_pmf, DiscreteLaplace};
use crate::error::{invalid_arg, Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::measure::{NoisyCountMeasurement, Postprocess, QubitBasis, MIN_OUTCOME_PROB};
use crate::quantum::{
    density_trace_distance, pure_trace_distance, DensityMatrix, PureState, State,
};

/// Largest joint register count simulated as a statevector.
pub const MAX_JOINT_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One joint state, conditioned round after round.
    Real,
    /// A fresh ρ^⊗n every round.
    Ideal,
    /// A fresh ρ^⊗n at the start of every epoch.
    Hybrid,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Real => "real",
            Mode::Ideal => "ideal",
            Mode::Hybrid => "hybrid",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Mode::Real),
            "ideal" => Ok(Mode::Ideal),
            "hybrid" => Ok(Mode::Hybrid),
            _ => Err(invalid_arg(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpmwParams {
    pub m: usize,
    pub eps: f64,
    pub mu: f64,
    pub n: usize,
    pub update_cap: usize,
    pub eta: f64,
    pub mode: Mode,
    pub seed: u64,
}

/// μ = ε / (4 ln(m + 1)).
pub fn default_mu(eps: f64, m: usize) -> f64 {
    eps / (4.0 * ((m.max(1) + 1) as f64).ln())
}

/// Copy count ln²m · ln²d / ε⁸ with every hidden constant set to one.
pub fn db_size(m: usize, d: usize, eps: f64) -> f64 {
    let lm = (m.max(2) as f64).ln();
    let ld = (d as f64).ln();
    lm * lm * ld * ld / eps.powi(8)
}

impl QpmwParams {
    /// Defaults for a qubit target: μ from [`default_mu`], the default cap
    /// and learning rate, real mode, seed 0.
    pub fn new(m: usize, eps: f64, n: usize) -> Self {
        Self {
            m,
            eps,
            mu: default_mu(eps, m),
            n,
            update_cap: default_update_cap(2, eps),
            eta: default_eta(eps),
            mode: Mode::Real,
            seed: 0,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid_arg(format!("ε must be positive, got {}", self.eps)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid_arg(format!("μ must be positive, got {}", self.mu)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid_arg(format!("η must be positive, got {}", self.eta)));
        }
        if self.n == 0 {
            return Err(invalid_arg("need at least one copy"));
        }
        Ok(())
    }

    /// Laplace scale nμ of both measurements, in count units.
    pub fn noise_scale(&self) -> f64 {
        self.n as f64 * self.mu
    }
}

/// The n-copy joint state. Mixed targets are purified register by register,
/// with each system qubit followed by its ancilla.
#[derive(Clone, Debug)]
struct Joint {
    original: PureState,
    target: DensityMatrix,
    counted: Vec<bool>,
    n: usize,
    reduced_original: Option<DensityMatrix>,
}

impl Joint {
    fn new(rho: &State, n: usize) -> Result<Self> {
        if rho.dim() != 2 || rho.dims().len() != 1 {
            return Err(invalid_arg("target must be a single qubit"));
        }
        match rho {
            State::Pure(psi) => {
                if n > MAX_JOINT_QUBITS {
                    return Err(Error::TooLarge(n));
                }
                Ok(Self {
                    original: psi.power(n)?,
                    target: psi.to_density(),
                    counted: vec![true; n],
                    n,
                    reduced_original: None,
                })
            }
            State::Mixed(r) => {
                if 2 * n > MAX_JOINT_QUBITS {
                    return Err(Error::TooLarge(2 * n));
                }
                let (vals, vecs) = linalg::hermitian_eigen(r.matrix());
                let mut amps = vec![C64::new(0.0, 0.0); 4];
                for (k, &l) in vals.iter().enumerate() {
                    let s = l.max(0.0).sqrt();
                    for sys in 0..2 {
                        amps[2 * sys + k] += vecs[(sys, k)] * s;
                    }
                }
                let pair = PureState::normalized(amps.into(), vec![2, 2])?;
                let joint = pair.power(n)?;
                let dims = vec![2; 2 * n];
                let original = PureState::normalized(joint.into_amplitudes(), dims)?;
                Ok(Self {
                    original,
                    target: r.clone(),
                    counted: (0..2 * n).map(|q| q % 2 == 0).collect(),
                    n,
                    reduced_original: Some(DensityMatrix::tensor_all(&vec![r.clone(); n])?),
                })
            }
        }
    }

    fn bases(&self, effect: &QubitEffect) -> Vec<QubitBasis> {
        self.counted
            .iter()
            .map(|&c| {
                if c {
                    effect.basis()
                } else {
                    QubitBasis::computational()
                }
            })
            .collect()
    }

    fn measurement(
        &self,
        effect: &QubitEffect,
        noise: &DiscreteLaplace,
        post: Postprocess,
    ) -> Result<NoisyCountMeasurement> {
        NoisyCountMeasurement::new(self.bases(effect), noise.clone(), post)?
            .with_counted(self.counted.clone())?
            .with_accept(effect.eigenvalues[0], effect.eigenvalues[1])
    }

    /// Eigenbasis count distribution of ρ^⊗n, by the product formula.
    fn original_weights(&self, effect: &QubitEffect) -> Vec<f64> {
        let v1 = effect.basis().vector(1);
        let p1 = v1.dotc(&(self.target.matrix() * &v1)).re.clamp(0.0, 1.0);
        hamming_weight_pmf(&vec![p1; self.n])
    }

    /// Trace distance between the system part of `state` and ρ^⊗n.
    fn damage(&self, state: &PureState) -> Result<f64> {
        match &self.reduced_original {
            None => pure_trace_distance(state, &self.original),
            Some(target) => density_trace_distance(&self.reduce(state)?, target),
        }
    }

    fn reduce(&self, state: &PureState) -> Result<DensityMatrix> {
        let n = self.n;
        let total = 2 * n;
        let mut m = CMatrix::zeros(1 << n, 1 << n);
        for (idx, a) in state.amplitudes().iter().enumerate() {
            let (mut sys, mut anc) = (0usize, 0usize);
            for i in 0..n {
                sys = (sys << 1) | ((idx >> (total - 1 - 2 * i)) & 1);
                anc = (anc << 1) | ((idx >> (total - 2 - 2 * i)) & 1);
            }
            m[(sys, anc)] = *a;
        }
        DensityMatrix::from_unnormalized(linalg::hermitize(&(&m * m.adjoint())), vec![2; n])
    }
}

fn threshold(center: f64, eps: f64) -> Postprocess {
    Postprocess::Threshold {
        center,
        half_width: eps / 2.0,
    }
}

/// Update probability λ of `meas` on weights, and the damage of the
/// no-update branch (1 if that branch is impossible).
fn update_prob_and_damage(meas: &NoisyCountMeasurement, weights: &[f64]) -> Result<(f64, f64)> {
    let dist = meas.outcome_dist_from_weights(weights)?;
    let lambda = dist.prob(1).clamp(0.0, 1.0);
    let damage = if dist.prob(0) >= MIN_OUTCOME_PROB {
        let (ov, _) = meas.overlap_from_weights(weights, 0)?;
        (1.0 - ov * ov).max(0.0).sqrt()
    } else {
        1.0
    };
    Ok((lambda, damage))
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub update: bool,
    pub state: PureState,
    /// Exact probability of an update on the input joint state.
    pub lambda: f64,
}

/// CheckForUpdate: threshold measurement of the accept count of `effect` on
/// every register, centred on the hypothesis value with half-width ε/2 and
/// noise scale nμ.
pub fn check_for_update<R: Rng + ?Sized>(
    joint: &PureState,
    effect: &QubitEffect,
    h: &HypothesisState,
    eps: f64,
    mu: f64,
    rng: &mut R,
) -> Result<CheckOutcome> {
    let n = joint.num_registers();
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: h.dim(),
        });
    }
    let c = h.predict(&effect.element())?;
    let noise = DiscreteLaplace::new(n as f64 * mu)?;
    let meas = NoisyCountMeasurement::uniform(n, effect.basis(), noise, threshold(c, eps))?
        .with_accept(effect.eigenvalues[0], effect.eigenvalues[1])?;
    let lambda = meas.outcome_dist(&State::Pure(joint.clone()))?.prob(1);
    let (u, state, _) = meas.measure(joint, rng)?;
    Ok(CheckOutcome {
        update: u == 1,
        state,
        lambda,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index, which is also the effect's position in the stream.
    pub t: usize,
    pub effect: QubitEffect,
    pub true_value: f64,
    pub hypothesis_value: f64,
    pub update: bool,
    /// Missing only for the round that triggered the abort.
    pub answer: Option<f64>,
    pub raw_count: Option<i64>,
    /// Update probability on ρ^⊗n.
    pub lambda: f64,
    /// Update probability on the state the round actually received.
    pub kappa: f64,
    /// No-update damage to ρ^⊗n in isolation.
    pub isolated_damage: f64,
    /// Trace distance between the state before and after this round.
    pub step_damage: f64,
    /// Trace distance from ρ^⊗n after this round.
    pub damage: f64,
    pub epoch: usize,
}

/// An epoch window fixed in advance from the λ's: from the epoch's first
/// round until Π(1 − λ_j) ≤ 1/2 or the stream ends, regardless of where an
/// update actually fell. Rounds after a real update are followed on the
/// no-update branch so that `real_none` is the exact probability of no
/// update in the window on the state the epoch started with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochWindow {
    pub start: usize,
    pub end: usize,
    /// Π(1 − λ_j) over the window.
    pub ideal_none: f64,
    /// Π(1 − κ_j) over the window.
    pub real_none: f64,
    pub start_damage: f64,
    /// Σ of isolated no-update damages over the window.
    pub isolated_sum: f64,
    pub updated: bool,
}

impl EpochWindow {
    /// start damage plus Σε_j: bounds |ideal_none − real_none|.
    pub fn bound(&self) -> f64 {
        self.start_damage + self.isolated_sum
    }

    pub fn ideal_update_probability(&self) -> f64 {
        1.0 - self.ideal_none
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpmwTranscript {
    pub params: QpmwParams,
    /// Length of the stream; rounds after an abort are missing.
    pub queries: usize,
    pub rounds: Vec<RoundRecord>,
    /// 1-based rounds closing each epoch.
    pub epochs: Vec<usize>,
    pub windows: Vec<EpochWindow>,
    pub aborted: bool,
}

impl QpmwTranscript {
    pub fn update_count(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.update && r.answer.is_some())
            .count()
    }

    pub fn final_damage(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.damage)
    }

    /// Fraction of queries answered within `tol` of the true value. Queries
    /// lost to an abort count as misses.
    pub fn accuracy(&self, tol: f64) -> f64 {
        if self.queries == 0 {
            return 1.0;
        }
        let good = self
            .rounds
            .iter()
            .filter(|r| r.answer.is_some_and(|a| (a - r.true_value).abs() <= tol))
            .count();
        good as f64 / self.queries as f64
    }

    /// A header line with the parameters, one line per round, then a
    /// summary line with epochs, windows and the abort flag.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = serde_json::to_string(
            &serde_json::json!({ "record": "header", "params": self.params }),
        )?;
        out.push('\n');
        for r in &self.rounds {
            let mut v = serde_json::to_value(r)?;
            v["record"] = "round".into();
            out.push_str(&serde_json::to_string(&v)?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "record": "summary",
            "epochs": self.epochs,
            "windows": self.windows,
            "aborted": self.aborted,
            "update_count": self.update_count(),
        });
        out.push_str(&serde_json::to_string(&summary)?);
        out.push('\n');
        Ok(out)
    }
}

struct OpenWindow {
    start: usize,
    ideal_none: f64,
    real_none: f64,
    start_damage: f64,
    isolated_sum: f64,
}

impl OpenWindow {
    fn new(start: usize, start_damage: f64) -> Self {
        Self {
            start,
            ideal_none: 1.0,
            real_none: 1.0,
            start_damage,
            isolated_sum: 0.0,
        }
    }

    fn push(&mut self, lambda: f64, kappa: f64, isolated: f64) {
        self.ideal_none *= 1.0 - lambda;
        self.real_none *= 1.0 - kappa;
        self.isolated_sum += isolated;
    }

    fn close(self, end: usize, updated: bool) -> EpochWindow {
        EpochWindow {
            start: self.start,
            end,
            ideal_none: self.ideal_none,
            real_none: self.real_none,
            start_damage: self.start_damage,
            isolated_sum: self.isolated_sum,
            updated,
        }
    }
}

/// Runs QPMW on `rho` (one qubit) against a fixed stream of effects.
pub fn qpmw_run(
    rho: &State,
    stream: &[QubitEffect],
    params: &QpmwParams,
) -> Result<QpmwTranscript> {
    params.validate()?;
    let joint = Joint::new(rho, params.n)?;
    let noise = DiscreteLaplace::new(params.noise_scale())?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut h = online_learn(2, params.eta)?;

    let mut rounds = Vec::with_capacity(stream.len());
    let mut epochs = Vec::new();
    let mut windows = Vec::new();
    let mut aborted = false;
    let mut updates = 0usize;

    let mut state = joint.original.clone();
    let mut window = OpenWindow::new(1, 0.0);
    let mut epoch = 0usize;

    for (i, effect) in stream.iter().enumerate() {
        let t = i + 1;
        let element = effect.element();
        let true_value = effect.value(&joint.target)?;
        let c = h.predict(&element)?;
        let h_before = h.clone();
        let check = joint.measurement(effect, &noise, threshold(c, params.eps))?;
        let (lambda, isolated) = update_prob_and_damage(&check, &joint.original_weights(effect))?;

        let before = match params.mode {
            Mode::Ideal => joint.original.clone(),
            _ => state.clone(),
        };
        let (u, after_check, p) = check.measure(&before, &mut rng)?;
        let update = u == 1;
        let kappa = match params.mode {
            Mode::Ideal => lambda,
            _ if update => p,
            _ => 1.0 - p,
        };
        window.push(lambda, kappa, isolated);

        let mut answer = Some(c);
        let mut raw_count = None;
        let mut after = after_check;
        if update {
            if updates >= params.update_cap {
                aborted = true;
                answer = None;
            } else {
                let raw = joint.measurement(effect, &noise, Postprocess::RawCount)?;
                let (y, post, _) = raw.measure(&after, &mut rng)?;
                let b = (y as f64 / params.n as f64).clamp(0.0, 1.0);
                h.update(&element, b)?;
                updates += 1;
                raw_count = Some(y);
                answer = Some(b);
                after = post;
            }
        }
        let step_damage = pure_trace_distance(&before, &after)?;
        let damage = joint.damage(&after)?;

        let condition_end = window.ideal_none <= 0.5 || t == stream.len();
        let epoch_ends = update || condition_end || aborted;
        if epoch_ends {
            epochs.push(t);
        }
        rounds.push(RoundRecord {
            t,
            effect: *effect,
            true_value,
            hypothesis_value: c,
            update,
            answer,
            raw_count,
            lambda,
            kappa,
            isolated_damage: isolated,
            step_damage,
            damage,
            epoch,
        });

        if epoch_ends {
            let open = std::mem::replace(&mut window, OpenWindow::new(t + 1, 0.0));
            let closed = if update && !condition_end {
                let branch = match params.mode {
                    Mode::Ideal => None,
                    _ if p < 1.0 => Some(check.condition_pure(&before, 0)?.0),
                    _ => None,
                };
                extend_window(
                    open,
                    &joint,
                    &noise,
                    params,
                    &h_before,
                    t,
                    &stream[t..],
                    branch,
                )?
            } else {
                open.close(t, update)
            };
            windows.push(closed);
            epoch += 1;
            if aborted {
                break;
            }
            state = if params.mode == Mode::Hybrid {
                joint.original.clone()
            } else {
                after
            };
            let start_damage = if params.mode == Mode::Real {
                damage
            } else {
                0.0
            };
            window = OpenWindow::new(t + 1, start_damage);
        } else if params.mode != Mode::Ideal {
            state = after;
        }
    }
    Ok(QpmwTranscript {
        params: params.clone(),
        queries: stream.len(),
        rounds,
        epochs,
        windows,
        aborted,
    })
}

/// Continues a window past a real update along the no-update branch, with
/// the hypothesis held at its pre-update value. Without a branch state
/// (ideal mode, or an impossible branch) κ is taken equal to λ.
#[allow(clippy::too_many_arguments)]
fn extend_window(
    mut window: OpenWindow,
    joint: &Joint,
    noise: &DiscreteLaplace,
    params: &QpmwParams,
    h: &HypothesisState,
    last: usize,
    rest: &[QubitEffect],
    mut branch: Option<PureState>,
) -> Result<EpochWindow> {
    let mut t = last;
    for effect in rest {
        if window.ideal_none <= 0.5 {
            break;
        }
        t += 1;
        let c = h.predict(&effect.element())?;
        let check = joint.measurement(effect, noise, threshold(c, params.eps))?;
        let (lambda, isolated) = update_prob_and_damage(&check, &joint.original_weights(effect))?;
        let kappa = match branch.take() {
            None => lambda,
            Some(s) => {
                let dist = check.outcome_dist_from_weights(&check.weights_pure(&s)?)?;
                if dist.prob(0) >= MIN_OUTCOME_PROB {
                    branch = Some(check.condition_pure(&s, 0)?.0);
                }
                dist.prob(1).clamp(0.0, 1.0)
            }
        };
        window.push(lambda, kappa, isolated);
    }
    Ok(window.close(t, true))
}

/// Real-versus-ideal comparison over the epoch windows of many runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub windows: usize,
    /// Windows where |Π(1−λ) − Π(1−κ)| exceeds start damage + Σε.
    pub exact_violations: usize,
    pub largest_exact_gap: f64,
    /// Fraction of windows in which an update happened.
    pub empirical_frequency: f64,
    /// Mean of 1 − Π(1−λ) over windows.
    pub ideal_mean: f64,
    /// Mean damage bound over windows.
    pub bound_mean: f64,
    pub standard_error: f64,
    pub within_bound: bool,
}

/// Compares the windows' update indicators with their ideal-state update
/// probabilities: the gap in means must stay below the mean damage bound
/// plus three standard errors.
pub fn coupling_summary(runs: &[QpmwTranscript]) -> CouplingSummary {
    let windows: Vec<&EpochWindow> = runs.iter().flat_map(|r| &r.windows).collect();
    let k = windows.len();
    let mut exact_violations = 0;
    let mut largest_exact_gap: f64 = 0.0;
    for w in &windows {
        let gap = (w.ideal_none - w.real_none).abs();
        largest_exact_gap = largest_exact_gap.max(gap - w.bound());
        if gap > w.bound() + 1e-9 {
            exact_violations += 1;
        }
    }
    if k == 0 {
        return CouplingSummary {
            windows: 0,
            exact_violations: 0,
            largest_exact_gap: 0.0,
            empirical_frequency: 0.0,
            ideal_mean: 0.0,
            bound_mean: 0.0,
            standard_error: 0.0,
            within_bound: true,
        };
    }
    let kf = k as f64;
    let freq = windows.iter().filter(|w| w.updated).count() as f64 / kf;
    let ideal_mean = windows
        .iter()
        .map(|w| w.ideal_update_probability())
        .sum::<f64>()
        / kf;
    let bound_mean = windows.iter().map(|w| w.bound()).sum::<f64>() / kf;
    let p = freq.clamp(1.0 / kf, 1.0 - 1.0 / kf.max(2.0));
    let se = (p * (1.0 - p) / kf).sqrt();
    CouplingSummary {
        windows: k,
        exact_violations,
        largest_exact_gap,
        empirical_frequency: freq,
        ideal_mean,
        bound_mean,
        standard_error: se,
        within_bound: (freq - ideal_mean).abs() <= bound_mean + 3.0 * se,
    }
}

/// Rounds of a real-mode run whose running damage exceeds the sum of the
/// step damages so far by more than 1e-6.
pub fn accumulation_violations(run: &QpmwTranscript) -> usize {
    if run.params.mode != Mode::Real {
        return 0;
    }
    let mut total = 0.0;
    run.rounds
        .iter()
        .filter(|r| {
            total += r.step_damage;
            r.damage > total + 1e-6
        })
        .count()
}
