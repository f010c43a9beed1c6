use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Check, ExperimentConfig, Outcome};
use crate::classical::{
    bit_flip_neighbors, dp_epsilon, dp_epsilon_by_weight, hellinger_sq, posterior,
    posterior_kl_audit, AuditPath, ClassicalMechanism, DiscreteLaplace, FiniteDistribution,
    OutputKernel, ProductBernoulli, UntruncatedNoisyCount,
};
use crate::error::{invalid_arg, Error, Result};
use crate::learner::{
    accumulation_violations, coupling_summary, damage_bounds, default_eta, greedy_mistakes_random,
    mistake_bound, qpmw_run, random_projective_stream, Mode, QpmwParams, QpmwTranscript,
};
use crate::linalg::{self, gates};
use crate::measure::{
    compose_dp, dp_to_gentle, BellProjection, Bound, ComposeFailure, NoisyCountMeasurement,
    NoisyParity, RandomizedResponse, MIN_OUTCOME_PROB,
};
use crate::quantum::{
    apply_and_condition, density_trace_distance, random, DensityMatrix, PovmElement, PureState,
    QuantumOperation,
};

const MAX_ENUMERATED_BITS: usize = 16;

fn max(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::INFINITY, f64::min)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

pub(super) fn lsigma_dp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sigma = cfg.f64("sigma", 2.0)?;
    let n = cfg.usize("n", 8)?;
    if n > MAX_ENUMERATED_BITS {
        return Err(Error::TooLarge(n));
    }
    let kernel = ClassicalMechanism::noisy_count(n, sigma)?;
    let enumerated = dp_epsilon(&kernel, bit_flip_neighbors(n));
    let by_weight = dp_epsilon_by_weight(&kernel)
        .ok_or_else(|| invalid_arg("noisy count must be symmetric"))?;
    let noise = DiscreteLaplace::new(sigma)?;
    let untruncated = UntruncatedNoisyCount {
        n,
        noise: noise.clone(),
    };
    let c = noise.cutoff();
    let extreme = max([-c, n as i64 + c].into_iter().flat_map(|y| {
        let k = &untruncated;
        (0..n).map(move |w| {
            (k.weight_prob(w, y).unwrap() / k.weight_prob(w + 1, y).unwrap())
                .ln()
                .abs()
        })
    }));

    let mut out = Outcome::default();
    for y in kernel.outputs() {
        let worst = max((0..n).map(|w| {
            (kernel.weight_prob(w, y).unwrap() / kernel.weight_prob(w + 1, y).unwrap())
                .ln()
                .abs()
        }));
        out.record(&json!({ "y": y, "max_log_ratio": worst }))?;
    }
    out.stat("eps_target", 1.0 / sigma);
    out.stat("eps_enumerated", enumerated);
    out.stat("eps_by_weight", by_weight);
    out.stat("eps_untruncated_extreme", extreme);
    out.stat("cutoff", c as f64);
    out.check(Check::at_most(
        "max_log_ratio",
        enumerated,
        1.0 / sigma + 1e-9,
    ));
    out.check(Check::at_most(
        "weight_path_agreement",
        (enumerated - by_weight).abs(),
        1e-12,
    ));
    out.check(Check::at_most(
        "untruncated_extreme_gap",
        (extreme - 1.0 / sigma).abs(),
        1e-6,
    ));
    Ok(out)
}

/// Largest damage over the outcomes of `meas` on a product of pure qubits.
fn product_alpha(meas: &NoisyCountMeasurement, qubits: &[PureState]) -> Result<f64> {
    let weights = meas.weights_product_pure(qubits)?;
    let dist = meas.outcome_dist_from_weights(&weights)?;
    let mut alpha: f64 = 0.0;
    for (y, p) in dist.iter() {
        if p >= MIN_OUTCOME_PROB {
            let (ov, _) = meas.overlap_from_weights(&weights, y)?;
            alpha = alpha.max((1.0 - ov * ov).max(0.0).sqrt());
        }
    }
    Ok(alpha)
}

pub(super) fn lsigma_gentle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sigma = cfg.f64("sigma", 8.0)?;
    let n = cfg.usize("n", 8)?;
    let trials = cfg.trials_or(200);
    let meas = NoisyCountMeasurement::lsigma(n, sigma)?;
    let bound = dp_to_gentle(1.0 / sigma, n)?;
    let alphas = (0..trials)
        .into_par_iter()
        .map(|i| product_alpha(&meas, &random::product_qubits(&mut cfg.rng(i), n)))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Outcome::default();
    for (i, a) in alphas.iter().enumerate() {
        out.record(&json!({ "trial": i, "alpha": a }))?;
    }
    let violations = alphas.iter().filter(|&&a| a > bound).count();
    out.stat("alpha_max", max(alphas.iter().copied()));
    out.stat("alpha_mean", mean(&alphas));
    out.stat("bound", bound);
    out.check(Check::at_most(
        "alpha_max",
        max(alphas.iter().copied()),
        bound,
    ));
    out.check(Check::at_most("violations", violations as f64, 0.0));
    Ok(out)
}

pub(super) fn classical_lemma(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sigma = cfg.f64("sigma", 1.0)?;
    let n = cfg.usize("n", 10)?;
    let trials = cfg.trials_or(10);
    let eps = 1.0 / sigma;
    let kernel = ClassicalMechanism::noisy_count(n, sigma)?;
    let mut priors = vec![
        ("uniform".to_string(), ProductBernoulli::iid(n, 0.5)?),
        ("biased".into(), ProductBernoulli::iid(n, 0.2)?),
    ];
    for i in 0..trials {
        let mut rng = cfg.rng(i);
        let p = (0..n).map(|_| rng.random_range(0.02..0.98)).collect();
        priors.push((format!("random-{i}"), ProductBernoulli::new(p)?));
    }
    let mut out = Outcome::default();
    let (mut max_kl, mut max_tv, mut max_gap, mut kl_bound, mut tv_bound) =
        (0f64, 0f64, 0f64, 0f64, 0f64);
    for (label, d) in &priors {
        let fast = posterior_kl_audit(d, &kernel, eps, AuditPath::HammingWeight)?;
        let gap = if n <= MAX_ENUMERATED_BITS {
            let full = posterior_kl_audit(d, &kernel, eps, AuditPath::Enumerate)?;
            fast.rows
                .iter()
                .zip(&full.rows)
                .map(|(a, b)| {
                    (a.kl - b.kl)
                        .abs()
                        .max((a.tv - b.tv).abs())
                        .max((a.prob - b.prob).abs())
                })
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        out.record(&json!({ "prior": label, "max_kl": fast.max_kl, "max_tv": fast.max_tv, "path_gap": gap }))?;
        max_kl = max_kl.max(fast.max_kl);
        max_tv = max_tv.max(fast.max_tv);
        max_gap = max_gap.max(gap);
        kl_bound = fast.kl_bound;
        tv_bound = fast.tv_bound;
    }
    out.stat("max_kl", max_kl);
    out.stat("max_tv", max_tv);
    out.stat("kl_bound", kl_bound);
    out.stat("tv_bound", tv_bound);
    out.stat("path_gap", max_gap);
    out.check(Check::at_most("max_kl", max_kl, kl_bound));
    out.check(Check::at_most("max_tv", max_tv, tv_bound));
    out.check(Check::at_most("path_gap", max_gap, 1e-10));
    Ok(out)
}

pub(super) fn hellinger_identity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sigma = cfg.f64("sigma", 2.0)?;
    let n = cfg.usize("n", 6)?;
    let trials = cfg.trials_or(200);
    if n > 12 {
        return Err(Error::TooLarge(n));
    }
    let meas = NoisyCountMeasurement::lsigma(n, sigma)?;
    let kernel = ClassicalMechanism::noisy_count(n, sigma)?;
    let gaps = (0..trials)
        .into_par_iter()
        .map(|i| {
            let psi = PureState::tensor_all(&random::product_qubits(&mut cfg.rng(i), n))?;
            let probs: Vec<f64> = psi.amplitudes().iter().map(|a| a.norm_sqr()).collect();
            let prior = FiniteDistribution::normalized((0..1i64 << n).collect(), probs)?;
            let dist = meas.outcome_dist(&psi.clone().into())?;
            let mut worst: f64 = 0.0;
            for (y, p) in dist.iter() {
                if p < 1e-200 {
                    continue;
                }
                let (post, _) = meas.condition_pure(&psi, y)?;
                let overlap = psi.inner(&post)?.norm();
                let h2 = hellinger_sq(&prior, &posterior(&prior, &kernel, y)?);
                worst = worst.max((overlap - (1.0 - h2)).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Outcome::default();
    for (i, g) in gaps.iter().enumerate() {
        out.record(&json!({ "trial": i, "max_gap": g }))?;
    }
    out.stat("max_gap", max(gaps.iter().copied()));
    out.check(Check::at_most("max_gap", max(gaps.iter().copied()), 1e-9));
    Ok(out)
}

pub(super) fn notgentle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.usize("n", 8)?;
    if n > 12 {
        return Err(Error::TooLarge(n));
    }
    let sigma = n as f64 / 2.0;
    let mut diag = vec![0.0; 1 << n];
    diag[0] = 0.5;
    diag[(1 << n) - 1] = 0.5;
    let rho = DensityMatrix::diagonal(&diag, vec![2; n])?;
    let meas = NoisyCountMeasurement::lsigma(n, sigma)?;
    let (post, _) = meas.condition_density(&rho, 0)?;
    let damage = density_trace_distance(&post, &rho)?;
    let closed = 0.5 * (1.0 - (-2f64).exp()) / (1.0 + (-2f64).exp());
    let mut out = Outcome::default();
    out.stat("damage", damage);
    out.stat("closed_form", closed);
    out.check(Check::at_most(
        "closed_form_gap",
        (damage - closed).abs(),
        1e-9,
    ));
    out.check(Check::above("damage", damage, 1.0 / 3.0));
    Ok(out)
}

/// Trace distance between I/2^n and its post-measurement state at `y`,
/// through the Hamming-weight distribution.
pub(crate) fn uniform_damage(n: usize, sigma: f64, y: i64) -> Result<f64> {
    let kernel = ClassicalMechanism::noisy_count(n, sigma)?;
    let b = crate::classical::hamming_weight_pmf(&vec![0.5; n]);
    let k: Vec<f64> = (0..=n).map(|w| kernel.weight_prob(w, y).unwrap()).collect();
    let p: f64 = b.iter().zip(&k).map(|(bw, kw)| bw * kw).sum();
    if p < MIN_OUTCOME_PROB {
        return Err(Error::ZeroProbability(y));
    }
    Ok(0.5
        * b.iter()
            .zip(&k)
            .map(|(bw, kw)| bw * (kw / p - 1.0).abs())
            .sum::<f64>())
}

pub(super) fn notgentleprod(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.usize("n", 64)?;
    let sigma = (n as f64).sqrt();
    let damage = uniform_damage(n, sigma, 0)?;
    let mut out = Outcome::default();
    out.stat("damage", damage);
    out.stat("sigma", sigma);
    out.check(Check::at_least("damage", damage, 0.1));
    Ok(out)
}

pub(super) fn rr(cfg: &ExperimentConfig) -> Result<Outcome> {
    let beta = cfg.f64("beta", 0.1)?;
    let trials = cfg.trials_or(200);
    let r = RandomizedResponse::new(beta)?;
    let formula = ((1.0 + 2.0 * beta) / (1.0 - 2.0 * beta)).ln();
    let basis = [
        PureState::zero().to_density(),
        PureState::one().to_density(),
    ];
    let extreme = max((0..2).map(|b| (r.prob(&basis[0], b) / r.prob(&basis[1], b)).ln().abs()));
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(i);
            let rho = if i % 2 == 0 {
                random::haar_state(&mut rng, vec![2]).to_density()
            } else {
                random::random_density(&mut rng, vec![2])
            };
            let damage = max((0..2).map(|b| {
                r.post(&rho, b)
                    .and_then(|p| density_trace_distance(&p, &rho))
                    .unwrap_or(0.0)
            }));
            let sampled = max((0..2).map(|b| (r.prob(&rho, b) / r.prob(&basis[0], b)).ln().abs()));
            (damage, sampled)
        })
        .collect::<Vec<_>>();
    let mut out = Outcome::default();
    for (i, (d, s)) in rows.iter().enumerate() {
        out.record(&json!({ "trial": i, "damage": d, "log_ratio_vs_zero": s }))?;
    }
    let max_damage = max(rows.iter().map(|r| r.0));
    let max_sampled = max(rows.iter().map(|r| r.1));
    out.stat("dp_epsilon", r.dp_epsilon());
    out.stat("dp_epsilon_formula", formula);
    out.stat("dp_epsilon_extreme_states", extreme);
    out.stat("max_damage", max_damage);
    out.check(Check::at_most(
        "dp_epsilon_gap",
        (r.dp_epsilon() - formula).abs(),
        1e-9,
    ));
    out.check(Check::at_most(
        "extreme_state_gap",
        (extreme - formula).abs(),
        1e-9,
    ));
    out.check(Check::at_most(
        "sampled_log_ratio",
        max_sampled,
        formula + 1e-12,
    ));
    out.check(Check::at_most("max_damage", max_damage, 2.0 * beta));
    Ok(out)
}

pub(super) fn rebit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let trials = cfg.trials_or(100);
    let product_gap = max((0..trials).map(|i| {
        let mut rng = cfg.rng(i);
        let psi = random::real_qubit(&mut rng).tensor(&random::real_qubit(&mut rng));
        (crate::measure::rebit_witness(&psi).unwrap() - 0.5).abs()
    }));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi_minus = PureState::from_amplitudes(
        vec![
            linalg::re(h),
            linalg::re(0.0),
            linalg::re(0.0),
            linalg::re(-h),
        ],
        vec![2, 2],
    )?;
    let accepted = crate::measure::rebit_witness(&phi_minus)?;
    let rejected = crate::measure::rebit_witness(&PureState::bell())?;
    let mut out = Outcome::default();
    out.stat("product_max_gap", product_gap);
    out.stat("phi_minus", accepted);
    out.stat("phi_plus", rejected);
    out.check(Check::at_most("product_gap", product_gap, 1e-12));
    out.check(Check::at_most(
        "entangled_accept_gap",
        (accepted - 1.0).abs(),
        1e-12,
    ));
    out.check(Check::at_most(
        "entangled_reject_gap",
        rejected.abs(),
        1e-12,
    ));
    Ok(out)
}

pub(super) fn bell(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.usize("n", 5)?;
    let trials = cfg.trials_or(200);
    let probs = (0..trials)
        .into_par_iter()
        .map(|i| {
            let psi = PureState::tensor_all(&random::product_qubits(&mut cfg.rng(i), n))?;
            BellProjection::probs(&psi)
        })
        .collect::<Result<Vec<[f64; 2]>>>()?;
    let eps_product = max((0..2).map(|b| {
        let hi = max(probs.iter().map(|p| p[b]));
        let lo = min(probs.iter().map(|p| p[b]));
        (hi / lo).ln()
    }));
    let s = 2f64.powf(-((n - 1) as f64) / 2.0);
    let bound = ((1.0 + s) / (1.0 - s)).ln();
    let pairs = vec![PureState::bell(); (n - 1) / 2];
    let mut with0 = pairs.clone();
    with0.push(PureState::zero());
    let mut with1 = pairs;
    with1.push(PureState::one());
    let p0 = BellProjection::probs(&PureState::tensor_all(&with0)?)?;
    let p1 = BellProjection::probs(&PureState::tensor_all(&with1)?)?;
    let mut out = Outcome::default();
    for (i, p) in probs.iter().enumerate() {
        out.record(&json!({ "trial": i, "p0": p[0], "p1": p[1] }))?;
    }
    out.stat("eps_product_sampled", eps_product);
    out.stat("eps_product_bound", bound);
    out.stat("neighbor_p1_given_0", p0[1]);
    out.stat("neighbor_p1_given_1", p1[1]);
    out.check(Check::at_most("eps_product", eps_product, bound));
    out.check(Check::at_most("neighbor_zero_probability", p0[1], 1e-12));
    out.check(Check::at_least(
        "neighbor_certain_probability",
        p1[1],
        1.0 - 1e-12,
    ));
    Ok(out)
}

fn pair_state(a: &PureState, b: &PureState) -> PureState {
    a.tensor(b)
}

pub(super) fn parity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.usize("n", 240)?;
    let k = cfg.usize("k", 8)?;
    let blocks_default = n as f64 / (10.0 * k as f64);
    let sigma = cfg.f64("sigma", blocks_default)?;
    let trials = cfg.trials_or(1000);
    let m = NoisyParity::new(n, k, sigma)?;
    let blocks = m.num_blocks();

    let kernel = ClassicalMechanism::NoisyCount {
        n: blocks,
        noise: m.noise().clone(),
    };
    let eps = dp_epsilon_by_weight(&kernel)
        .ok_or_else(|| invalid_arg("noisy count must be symmetric"))?;

    // Γ = 0: every pair |01⟩. Γ = n/k: one |00⟩ pair per block.
    let (zero, one) = (PureState::zero(), PureState::one());
    let unmarked = pair_state(&zero, &one);
    let marked = pair_state(&zero, &zero);
    let per_block = k / 2;
    let even: Vec<PureState> = vec![unmarked.clone(); n / 2];
    let odd: Vec<PureState> = (0..n / 2)
        .map(|j| {
            if j % per_block == 0 {
                marked.clone()
            } else {
                unmarked.clone()
            }
        })
        .collect();
    let dist_even = m.outcome_dist_from_gamma(&m.gamma_weights_pairs(&even)?)?;
    let dist_odd = m.outcome_dist_from_gamma(&m.gamma_weights_pairs(&odd)?)?;
    let samples: Vec<(i64, i64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = cfg.rng(i);
            (dist_even.sample(&mut rng), dist_odd.sample(&mut rng))
        })
        .collect();
    let ye: Vec<f64> = samples.iter().map(|s| s.0 as f64).collect();
    let yo: Vec<f64> = samples.iter().map(|s| s.1 as f64).collect();
    let separation = mean(&yo) - mean(&ye);
    let se = (2.0 * m.noise().std_dev().powi(2) / trials as f64).sqrt();

    // Random product pairs: Γ mean against Σ_b (1 − Π_j (1 − 2 m_j))/2.
    let marks = [
        PovmElement::projector(&marked),
        PovmElement::projector(&pair_state(&one, &PureState::plus())),
    ];
    let product_gap = max((0..trials.min(50)).map(|i| {
        let mut rng = cfg.rng(trials + i);
        let pairs: Vec<PureState> = (0..n / 2)
            .map(|_| {
                pair_state(
                    &random::haar_state(&mut rng, vec![2]),
                    &random::haar_state(&mut rng, vec![2]),
                )
            })
            .collect();
        let g = m.gamma_weights_pairs(&pairs).unwrap();
        let got: f64 = g.iter().enumerate().map(|(w, p)| w as f64 * p).sum();
        let want: f64 = pairs
            .chunks(per_block)
            .map(|block| {
                let prod: f64 = block
                    .iter()
                    .map(|p| {
                        1.0 - 2.0
                            * marks
                                .iter()
                                .map(|e| e.expectation_pure(p).unwrap())
                                .sum::<f64>()
                    })
                    .product();
                (1.0 - prod) / 2.0
            })
            .sum();
        (got - want).abs()
    }));

    let mut out = Outcome::default();
    out.stat("blocks", blocks as f64);
    out.stat("dp_epsilon", eps);
    out.stat("dp_target", 1.0 / sigma);
    out.stat("separation", separation);
    out.stat("product_mean_gap", product_gap);
    out.stat(
        "tv_extremes",
        crate::classical::total_variation(&dist_even, &dist_odd),
    );
    out.check(Check::at_most("dp_epsilon", eps, 1.0 / sigma + 1e-9));
    out.check(Check::at_least(
        "separation",
        separation,
        blocks as f64 - 3.0 * se,
    ));
    out.check(Check::at_most("product_mean_gap", product_gap, 1e-9));
    Ok(out)
}

#[derive(Serialize)]
struct QpmwRow {
    seed: u64,
    mode: Mode,
    accuracy: f64,
    final_damage: f64,
    updates: usize,
    aborted: bool,
    epochs: usize,
    accumulation_violations: usize,
}

fn qpmw_params(cfg: &ExperimentConfig) -> Result<(QpmwParams, usize)> {
    let m = cfg.usize("m", 200)?;
    let eps = cfg.f64("eps", 0.4)?;
    let n = cfg.usize("n", 16)?;
    let mut p = QpmwParams::new(m, eps, n);
    if let Some(mu) = cfg.opt_f64("mu")? {
        p.mu = mu;
    }
    if let Some(eta) = cfg.opt_f64("eta")? {
        p.eta = eta;
    }
    if let Some(cap) = cfg.opt_f64("update_cap")? {
        p.update_cap = cap as usize;
    }
    p.validate()?;
    Ok((p, m))
}

/// Target |+⟩ by default, or a pure qubit at Bloch angles (theta, phi).
fn qpmw_target(cfg: &ExperimentConfig) -> Result<PureState> {
    Ok(match (cfg.opt_f64("theta")?, cfg.opt_f64("phi")?) {
        (None, None) => PureState::plus(),
        (t, p) => PureState::qubit_bloch(t.unwrap_or(0.0), p.unwrap_or(0.0)),
    })
}

fn qpmw_runs(
    cfg: &ExperimentConfig,
    base: &QpmwParams,
    m: usize,
    modes: &[Mode],
    trials: usize,
) -> Result<Vec<QpmwTranscript>> {
    let rho = qpmw_target(cfg)?.into();
    let jobs: Vec<(usize, Mode)> = (0..trials)
        .flat_map(|i| modes.iter().map(move |&md| (i, md)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, mode)| {
            let stream = random_projective_stream(&mut cfg.rng(i), m);
            let params = base
                .clone()
                .with_mode(mode)
                .with_seed(cfg.seed.wrapping_add(i as u64));
            qpmw_run(&rho, &stream, &params)
        })
        .collect()
}

fn qpmw_row(t: &QpmwTranscript) -> QpmwRow {
    QpmwRow {
        seed: t.params.seed,
        mode: t.params.mode,
        accuracy: t.accuracy(t.params.eps),
        final_damage: t.final_damage(),
        updates: t.update_count(),
        aborted: t.aborted,
        epochs: t.epochs.len(),
        accumulation_violations: accumulation_violations(t),
    }
}

fn qpmw_invariant_checks(out: &mut Outcome, runs: &[QpmwTranscript], prefix: &str) {
    let over_cap = runs
        .iter()
        .filter(|t| t.update_count() > t.params.update_cap)
        .count();
    let accumulation: usize = runs.iter().map(accumulation_violations).sum();
    let dichotomy = runs
        .iter()
        .flat_map(|t| &t.rounds)
        .filter(|r| match (r.update, r.answer, r.raw_count) {
            (false, Some(a), None) => a != r.hypothesis_value,
            (true, Some(_), Some(_)) | (true, None, None) => false,
            _ => true,
        })
        .count();
    out.check(Check::at_most(
        format!("{prefix}runs_over_update_cap"),
        over_cap as f64,
        0.0,
    ));
    out.check(Check::at_most(
        format!("{prefix}accumulation_violations"),
        accumulation as f64,
        0.0,
    ));
    out.check(Check::at_most(
        format!("{prefix}answer_dichotomy_violations"),
        dichotomy as f64,
        0.0,
    ));
}

fn coupling_checks(out: &mut Outcome, runs: &[QpmwTranscript], prefix: &str) {
    let c = coupling_summary(runs);
    out.stat(&format!("{prefix}coupling_windows"), c.windows as f64);
    out.stat(
        &format!("{prefix}coupling_empirical"),
        c.empirical_frequency,
    );
    out.stat(&format!("{prefix}coupling_ideal"), c.ideal_mean);
    out.stat(&format!("{prefix}coupling_bound"), c.bound_mean);
    out.stat(&format!("{prefix}coupling_se"), c.standard_error);
    out.check(Check::at_most(
        format!("{prefix}coupling_exact_violations"),
        c.exact_violations as f64,
        0.0,
    ));
    out.check(Check::at_most(
        format!("{prefix}coupling_gap"),
        (c.empirical_frequency - c.ideal_mean).abs(),
        c.bound_mean + 3.0 * c.standard_error,
    ));
}

pub(super) fn qpmw(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (base, m) = qpmw_params(cfg)?;
    let trials = cfg.trials_or(20);
    let mode: Mode = cfg.string("mode", "real")?.parse()?;
    let runs = qpmw_runs(cfg, &base, m, &[mode], trials)?;
    let mut out = Outcome::default();
    let rows: Vec<QpmwRow> = runs.iter().map(qpmw_row).collect();
    for r in &rows {
        out.record(r)?;
    }
    let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    let gentle = rows.iter().filter(|r| r.final_damage <= 0.5).count() as f64 / rows.len() as f64;
    out.stat("mu", base.mu);
    out.stat("eta", base.eta);
    out.stat("update_cap", base.update_cap as f64);
    out.stat("accuracy_mean", mean(&acc));
    out.stat("accuracy_min", min(acc.iter().copied()));
    out.stat(
        "damage_mean",
        mean(&rows.iter().map(|r| r.final_damage).collect::<Vec<_>>()),
    );
    out.stat("fraction_damage_at_most_half", gentle);
    out.stat(
        "aborted_runs",
        rows.iter().filter(|r| r.aborted).count() as f64,
    );
    out.stat(
        "updates_mean",
        mean(&rows.iter().map(|r| r.updates as f64).collect::<Vec<_>>()),
    );
    out.check(Check::at_least("accuracy_mean", mean(&acc), 0.95));
    out.check(Check::at_least("fraction_damage_at_most_half", gentle, 0.9));
    let coupling_runs = if mode == Mode::Real {
        runs.clone()
    } else {
        qpmw_runs(cfg, &base, m, &[Mode::Real], trials)?
    };
    coupling_checks(&mut out, &coupling_runs, "");
    qpmw_invariant_checks(&mut out, &runs, "");
    Ok(out)
}

pub(super) fn qpmw_modes(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (base, m) = qpmw_params(cfg)?;
    let trials = cfg.trials_or(20);
    let modes = [Mode::Real, Mode::Ideal, Mode::Hybrid];
    let runs = qpmw_runs(cfg, &base, m, &modes, trials)?;
    let mut out = Outcome::default();
    for r in &runs {
        out.record(&qpmw_row(r))?;
    }
    for mode in modes {
        let sel: Vec<QpmwTranscript> = runs
            .iter()
            .filter(|r| r.params.mode == mode)
            .cloned()
            .collect();
        let acc: Vec<f64> = sel.iter().map(|t| t.accuracy(t.params.eps)).collect();
        let dmg: Vec<f64> = sel.iter().map(|t| t.final_damage()).collect();
        out.stat(&format!("{mode}_accuracy_mean"), mean(&acc));
        out.stat(&format!("{mode}_damage_mean"), mean(&dmg));
        out.stat(
            &format!("{mode}_updates_mean"),
            mean(
                &sel.iter()
                    .map(|t| t.update_count() as f64)
                    .collect::<Vec<_>>(),
            ),
        );
        out.stat(
            &format!("{mode}_aborted_runs"),
            sel.iter().filter(|t| t.aborted).count() as f64,
        );
        coupling_checks(&mut out, &sel, &format!("{mode}_"));
        qpmw_invariant_checks(&mut out, &sel, &format!("{mode}_"));
    }
    Ok(out)
}

pub(super) fn mmw_mistakes(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.usize("d", 2)?;
    let eps = cfg.f64("eps", 0.3)?;
    let eta = cfg.f64("eta", default_eta(eps))?;
    let trials = cfg.trials_or(20);
    let runs = (0..trials)
        .into_par_iter()
        .map(|i| greedy_mistakes_random(&mut cfg.rng(i), d, eps, eta))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    for r in &runs {
        out.record(r)?;
    }
    let worst = runs.iter().map(|r| r.updates).max().unwrap_or(0);
    let bound = mistake_bound(d, eps);
    out.stat("max_updates", worst as f64);
    out.stat(
        "mean_updates",
        mean(&runs.iter().map(|r| r.updates as f64).collect::<Vec<_>>()),
    );
    out.stat("bound", bound as f64);
    out.check(Check::at_most("max_updates", worst as f64, bound as f64));
    out.check(Check::at_most(
        "unconverged_runs",
        runs.iter().filter(|r| !r.converged).count() as f64,
        0.0,
    ));
    Ok(out)
}

/// Worst slack of the acceptance bound over all subsets, and of the final-state bound.
fn damage_lemma_trial<R: Rng + ?Sized>(rng: &mut R, ops: usize) -> Result<(f64, f64)> {
    let rho = random::random_density(rng, vec![2, 2]);
    let seq: Vec<QuantumOperation> = (0..ops).map(|_| random::random_filter(rng, 4, 2)).collect();
    let mut eps = Vec::with_capacity(ops);
    let mut p = Vec::with_capacity(ops);
    for s in &seq {
        let (post, pi) = apply_and_condition(s, &rho)?;
        eps.push(density_trace_distance(&post, &rho)?);
        p.push(pi);
    }
    let mut q = Vec::with_capacity(ops);
    let mut cur = rho.clone();
    for s in &seq {
        let (post, qi) = apply_and_condition(s, &cur)?;
        q.push(qi);
        cur = post;
    }
    let mut worst_subset = f64::INFINITY;
    for mask in 0..1usize << ops {
        let subset: Vec<usize> = (0..ops).filter(|i| mask >> i & 1 == 1).collect();
        let (bound, _) = damage_bounds(&eps, &q, &subset)?;
        let pt: f64 = subset.iter().map(|&i| p[i]).product();
        let qt: f64 = subset.iter().map(|&i| q[i]).product();
        worst_subset = worst_subset.min(bound - (pt - qt).abs());
    }
    let (_, final_bound) = damage_bounds(&eps, &q, &[])?;
    Ok((
        worst_subset,
        final_bound - density_trace_distance(&cur, &rho)?,
    ))
}

pub(super) fn damage_lemma(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ops = cfg.usize("ops", 3)?;
    let trials = cfg.trials_or(100);
    let slacks = (0..trials)
        .into_par_iter()
        .map(|i| damage_lemma_trial(&mut cfg.rng(i), ops))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    for (i, (a, b)) in slacks.iter().enumerate() {
        out.record(&json!({ "trial": i, "subset_slack": a, "final_slack": b }))?;
    }
    let a = min(slacks.iter().map(|s| s.0));
    let b = min(slacks.iter().map(|s| s.1));
    out.stat("min_subset_slack", a);
    out.stat("min_final_slack", b);
    out.check(Check::at_least("min_subset_slack", a, -1e-9));
    out.check(Check::at_least("min_final_slack", b, -1e-9));
    Ok(out)
}

/// Sequential outcome probabilities of R_β₁ (computational basis) followed
/// by R_β₂ in the ± basis, and the product of their marginals.
fn compose_probs(
    r1: &RandomizedResponse,
    r2: &RandomizedResponse,
    rho: &DensityMatrix,
) -> Result<[[f64; 2]; 2]> {
    let h = gates::hadamard();
    let conj = |m: &DensityMatrix| DensityMatrix::from_unnormalized(&h * m.matrix() * &h, vec![2]);
    let mut seq = [[0.0; 2]; 2];
    for (y1, row) in seq.iter_mut().enumerate() {
        let p1 = r1.prob(rho, y1);
        let post = r1.post(rho, y1)?;
        for (y2, cell) in row.iter_mut().enumerate() {
            *cell = p1 * r2.prob(&conj(&post)?, y2);
        }
    }
    Ok(seq)
}

pub(super) fn compose_bounds(cfg: &ExperimentConfig) -> Result<Outcome> {
    let b1 = cfg.f64("beta", 0.02)?;
    let b2 = cfg.f64("beta2", b1)?;
    let trials = cfg.trials_or(200);
    let (r1, r2) = (RandomizedResponse::new(b1)?, RandomizedResponse::new(b2)?);
    let p = (0.5 - b1) * (0.5 - b2);
    let (rel_bound, eps_bound) = compose_dp(
        &[r1.dp_epsilon(), r2.dp_epsilon()],
        &[2.0 * b1, 2.0 * b2],
        p,
    )?;
    let h = gates::hadamard();
    let states: Vec<DensityMatrix> = (0..trials)
        .map(|i| random::random_density(&mut cfg.rng(i), vec![2]))
        .collect();
    let mut rel: f64 = 0.0;
    let mut tables = Vec::with_capacity(trials);
    for rho in &states {
        let seq = compose_probs(&r1, &r2, rho)?;
        let rot = DensityMatrix::from_unnormalized(&h * rho.matrix() * &h, vec![2])?;
        for (y1, row) in seq.iter().enumerate() {
            for (y2, &s) in row.iter().enumerate() {
                rel = rel.max((s / (r1.prob(rho, y1) * r2.prob(&rot, y2)) - 1.0).abs());
            }
        }
        tables.push(seq);
    }
    let mut eps: f64 = 0.0;
    for a in &tables {
        for b in &tables {
            for y in 0..4 {
                eps = eps.max((a[y / 2][y % 2] / b[y / 2][y % 2]).ln());
            }
        }
    }
    let mut out = Outcome::default();
    out.stat("p", p);
    out.stat("relative_accuracy", rel);
    out.stat("relative_accuracy_bound", rel_bound);
    out.stat("composed_epsilon", eps);
    out.stat("composed_epsilon_bound", eps_bound);
    out.check(Check::at_most("relative_accuracy", rel, rel_bound));
    out.check(Check::at_most("composed_epsilon", eps, eps_bound));
    Ok(out)
}

pub(super) fn compose_fail(cfg: &ExperimentConfig) -> Result<Outcome> {
    let eps = cfg.f64("eps", 0.3)?;
    let n = cfg.usize("n", 4096)?;
    let trials = cfg.trials_or(1000);
    let c = ComposeFailure::new(eps, n)?;
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| c.trial(&mut cfg.rng(i)).error)
        .collect();
    let rms = (errors.iter().map(|e| e * e).sum::<f64>() / trials as f64).sqrt();
    let floor = c.noise_floor();
    let mut out = Outcome::default();
    for (i, e) in errors.iter().enumerate() {
        out.record(&json!({ "trial": i, "error": e }))?;
    }
    let threshold = (n as f64).powf(-0.25);
    out.stat("flip_probability", c.flip_probability());
    out.stat("rms_error", rms);
    out.stat("noise_floor", floor);
    out.stat("ratio", rms / floor);
    out.stat("n_quarter_threshold", threshold);
    if eps > threshold {
        out.check(Check::above("rms_over_floor", rms / floor, 3.0));
    } else {
        out.check(Check::at_most("rms_over_floor", rms / floor, 1.5));
    }
    Ok(out)
}

pub(super) fn bounds_table(cfg: &ExperimentConfig) -> Result<Outcome> {
    let eps_grid = [0.01, 0.05, 0.1, 0.3];
    let n_grid = [4usize, 16, 64];
    let alpha_grid = [0.01, 0.05, 0.1, 0.2];
    let _ = cfg;
    let mut bounds = Vec::new();
    for &a in &alpha_grid {
        bounds.push(Bound::GentleToDp { alpha: a });
    }
    for &e in &eps_grid {
        bounds.push(Bound::TrivialToGentle { eps: e });
        for &n in &n_grid {
            bounds.push(Bound::DpToGentle { eps: e, n });
            bounds.push(Bound::DpToTrivial { eps: e, n });
        }
        bounds.push(Bound::ComposeDp {
            eps: vec![e, e],
            alphas: vec![0.01, 0.01],
            p: 0.5,
        });
    }
    for n in 1..=3usize {
        let delta = (std::f64::consts::SQRT_2 * 2.0).powi(-(n as i32));
        bounds.push(Bound::TrivialityTransfer {
            eps: delta / 4.0,
            d: 2,
            n,
        });
    }
    let mut out = Outcome::default();
    let mut failures = 0;
    for b in &bounds {
        let v = b.evaluate();
        if !matches!(v, Ok(x) if x.is_finite() && x >= 0.0) {
            failures += 1;
        }
        out.record(&json!({ "bound": b.name(), "args": b, "value": v.as_ref().ok() }))?;
    }
    let rejected = [
        Bound::GentleToDp { alpha: 0.25 },
        Bound::ComposeDp {
            eps: vec![0.1],
            alphas: vec![0.5],
            p: 0.4,
        },
    ]
    .iter()
    .filter(|b| b.evaluate().is_err())
    .count();
    out.stat("evaluated", bounds.len() as f64);
    out.check(Check::at_most("invalid_values", failures as f64, 0.0));
    out.check(Check::at_least(
        "out_of_domain_rejected",
        rejected as f64,
        2.0,
    ));
    Ok(out)
}
