//! Acceptance checks. Each test prints one PASS/FAIL line and then asserts.
//! Expected values are computed here from closed forms, not taken from the
//! library.

use std::time::{Duration, Instant};

use gentledp::{run_experiment, ExperimentConfig, ExperimentReport};

fn run(cfg: ExperimentConfig) -> ExperimentReport {
    run_experiment(&cfg).unwrap_or_else(|e| panic!("{} failed to run: {e}", cfg.name))
}

fn stat(r: &ExperimentReport, key: &str) -> f64 {
    *r.summary
        .get(key)
        .unwrap_or_else(|| panic!("{} has no summary value `{key}`", r.name))
}

fn verdict(label: &str, start: Instant, budget: Duration, failures: Vec<String>) {
    let elapsed = start.elapsed();
    let mut failures = failures;
    if elapsed > budget {
        failures.push(format!(
            "runtime {:.1}s over {:.0}s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ));
    }
    if failures.is_empty() {
        println!("PASS {label} ({:.2}s)", elapsed.as_secs_f64());
    } else {
        println!(
            "FAIL {label} ({:.2}s): {}",
            elapsed.as_secs_f64(),
            failures.join("; ")
        );
        panic!("{label}: {}", failures.join("; "));
    }
}

fn failed_checks(r: &ExperimentReport, tag: &str) -> Vec<String> {
    r.checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{tag} {} = {} vs {}", c.name, c.value, c.bound))
        .collect()
}

fn expect(failures: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        failures.push(msg());
    }
}

/// Adjacent untruncated geometric weights differ by exactly e^{1/σ}.
#[test]
fn noisy_count_dp_exactness() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for sigma in [1.0, 2.0, 8.0] {
        for n in [4u64, 8, 10] {
            let r = run(ExperimentConfig::new("lsigma-dp")
                .with_param("sigma", sigma)
                .with_param("n", n));
            let tag = format!("sigma={sigma} n={n}");
            failures.extend(failed_checks(&r, &tag));
            let eps = stat(&r, "eps_enumerated");
            expect(&mut failures, eps <= 1.0 / sigma + 1e-9, || {
                format!("{tag} enumerated {eps}")
            });
            let extreme = stat(&r, "eps_untruncated_extreme");
            expect(&mut failures, (extreme - 1.0 / sigma).abs() <= 1e-6, || {
                format!("{tag} extreme {extreme}")
            });
        }
    }
    verdict(
        "noisy count DP exactness",
        start,
        Duration::from_secs(60),
        failures,
    );
}

#[test]
fn classical_gentleness_lemma() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in [6u64, 10, 12] {
        let r = run(ExperimentConfig::new("classical-lemma")
            .with_param("sigma", 1.0)
            .with_param("n", n)
            .with_trials(4));
        let tag = format!("n={n}");
        failures.extend(failed_checks(&r, &tag));
        let nf = n as f64;
        let (kl, tv) = (stat(&r, "max_kl"), stat(&r, "max_tv"));
        expect(&mut failures, kl <= 2.0 * nf, || {
            format!("{tag} KL {kl} > {}", 2.0 * nf)
        });
        expect(&mut failures, tv <= 2.0 * nf.sqrt(), || {
            format!("{tag} TV {tv} > {}", 2.0 * nf.sqrt())
        });
        let gap = stat(&r, "path_gap");
        expect(&mut failures, gap <= 1e-10, || {
            format!("{tag} enumeration vs weight path {gap}")
        });
    }
    verdict(
        "classical gentleness lemma",
        start,
        Duration::from_secs(60),
        failures,
    );
}

#[test]
fn hellinger_overlap_identity() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (n, sigma) in [(6u64, 2.0), (10, 4.0)] {
        let r = run(ExperimentConfig::new("hellinger-identity")
            .with_param("n", n)
            .with_param("sigma", sigma)
            .with_trials(200));
        let tag = format!("n={n} sigma={sigma}");
        failures.extend(failed_checks(&r, &tag));
        let gap = stat(&r, "max_gap");
        expect(&mut failures, gap <= 1e-9, || format!("{tag} gap {gap}"));
        expect(&mut failures, r.trials.len() == 200, || {
            format!("{tag} ran {} states", r.trials.len())
        });
    }
    verdict(
        "Hellinger overlap identity",
        start,
        Duration::from_secs(120),
        failures,
    );
}

#[test]
fn dp_to_gentleness_constant() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (n, sigma) in [(8u64, 8.0), (10, 16.0), (12, 24.0)] {
        let r = run(ExperimentConfig::new("lsigma-gentle")
            .with_param("n", n)
            .with_param("sigma", sigma)
            .with_trials(200));
        let tag = format!("n={n} sigma={sigma}");
        failures.extend(failed_checks(&r, &tag));
        let bound = 2.0 * 2f64.sqrt() * (n as f64).sqrt() / sigma;
        let alpha = stat(&r, "alpha_max");
        expect(&mut failures, alpha <= bound, || {
            format!("{tag} alpha {alpha} > {bound}")
        });
        expect(&mut failures, stat(&r, "bound") - bound < 1e-12, || {
            format!("{tag} library bound differs")
        });
    }
    verdict(
        "DP to gentleness constant",
        start,
        Duration::from_secs(120),
        failures,
    );
}

#[test]
fn cat_state_damage_closed_form() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let expected = 0.5 * (1.0 - (-2f64).exp()) / (1.0 + (-2f64).exp());
    for n in [4u64, 8] {
        let r = run(ExperimentConfig::new("notgentle").with_param("n", n));
        let damage = stat(&r, "damage");
        expect(&mut failures, (damage - expected).abs() <= 1e-9, || {
            format!("n={n} damage {damage} vs {expected}")
        });
        expect(&mut failures, damage > 1.0 / 3.0, || {
            format!("n={n} damage {damage} not above 1/3")
        });
    }
    verdict(
        "cat-state damage closed form",
        start,
        Duration::from_secs(5),
        failures,
    );
}

/// ½ Σ_w Bin(n,½)(w) |k(w)/p − 1| with k(w) ∝ e^{−w/σ}, the interior kernel at y = 0.
fn uniform_damage_oracle(n: usize, sigma: f64) -> f64 {
    let mut ln_binom = vec![0.0; n + 1];
    for w in 1..=n {
        ln_binom[w] = ln_binom[w - 1] + ((n - w + 1) as f64).ln() - (w as f64).ln();
    }
    let b: Vec<f64> = ln_binom
        .iter()
        .map(|l| (l - n as f64 * 2f64.ln()).exp())
        .collect();
    let k: Vec<f64> = (0..=n).map(|w| (-(w as f64) / sigma).exp()).collect();
    let p: f64 = b.iter().zip(&k).map(|(x, y)| x * y).sum();
    0.5 * b
        .iter()
        .zip(&k)
        .map(|(x, y)| x * (y / p - 1.0).abs())
        .sum::<f64>()
}

#[test]
fn product_state_damage_at_sqrt_n() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for n in [16u64, 64, 256] {
        let r = run(ExperimentConfig::new("notgentleprod").with_param("n", n));
        let damage = stat(&r, "damage");
        let oracle = uniform_damage_oracle(n as usize, (n as f64).sqrt());
        expect(&mut failures, damage >= 0.1, || {
            format!("n={n} damage {damage} below 0.1")
        });
        expect(&mut failures, (damage - oracle).abs() <= 1e-9, || {
            format!("n={n} damage {damage} vs oracle {oracle}")
        });
    }
    verdict(
        "product-state damage at sigma = sqrt(n)",
        start,
        Duration::from_secs(5),
        failures,
    );
}

#[test]
fn randomized_response_privacy_and_damage() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for beta in [0.1f64, 0.25] {
        let r = run(ExperimentConfig::new("rr")
            .with_param("beta", beta)
            .with_trials(200));
        let tag = format!("beta={beta}");
        failures.extend(failed_checks(&r, &tag));
        let formula = ((1.0 + 2.0 * beta) / (1.0 - 2.0 * beta)).ln();
        let eps = stat(&r, "dp_epsilon");
        expect(&mut failures, (eps - formula).abs() <= 1e-9, || {
            format!("{tag} eps {eps} vs {formula}")
        });
        let damage = stat(&r, "max_damage");
        expect(&mut failures, damage <= 2.0 * beta, || {
            format!("{tag} damage {damage} > {}", 2.0 * beta)
        });
    }
    verdict(
        "randomized response privacy and damage",
        start,
        Duration::from_secs(30),
        failures,
    );
}

#[test]
fn mmw_mistake_cap() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let eps: f64 = 0.3;
    for d in [2u64, 4, 8] {
        let r = run(ExperimentConfig::new("mmw-mistakes")
            .with_param("d", d)
            .with_param("eps", eps)
            .with_trials(20));
        let tag = format!("d={d}");
        failures.extend(failed_checks(&r, &tag));
        let cap = (16.0 * (d as f64).ln() / (eps * eps)).ceil();
        for t in &r.trials {
            let updates = t["updates"].as_f64().unwrap();
            expect(&mut failures, updates <= cap, || {
                format!("{tag} run with {updates} updates > {cap}")
            });
        }
        expect(&mut failures, r.trials.len() == 20, || {
            format!("{tag} ran {} seeds", r.trials.len())
        });
    }
    verdict("MMW mistake cap", start, Duration::from_secs(60), failures);
}

/// The accuracy and damage clauses are not met at n = 16 with the default
/// noise scale; this test is expected to fail.
#[test]
fn qpmw_desk_scale_run() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let r = run(ExperimentConfig::new("qpmw")
        .with_param("m", 200u64)
        .with_param("eps", 0.4)
        .with_param("n", 16u64)
        .with_param("mode", "real")
        .with_trials(20));
    let mu = 0.4 / (4.0 * 201f64.ln());
    expect(&mut failures, (stat(&r, "mu") - mu).abs() < 1e-15, || {
        format!("mu {} is not the default {mu}", stat(&r, "mu"))
    });
    let acc = stat(&r, "accuracy_mean");
    expect(&mut failures, acc >= 0.95, || {
        format!("mean accuracy {acc:.3} < 0.95")
    });
    let gentle = stat(&r, "fraction_damage_at_most_half");
    expect(&mut failures, gentle >= 0.9, || {
        format!("fraction with damage <= 0.5 is {gentle:.2} < 0.9")
    });
    for name in [
        "coupling_exact_violations",
        "coupling_gap",
        "runs_over_update_cap",
    ] {
        let c = r.check(name).unwrap();
        expect(&mut failures, c.pass, || {
            format!("{name} = {} vs {}", c.value, c.bound)
        });
    }
    let cap = stat(&r, "update_cap");
    for t in &r.trials {
        let u = t["updates"].as_f64().unwrap();
        expect(&mut failures, u <= cap, || {
            format!("run with {u} updates > {cap}")
        });
    }
    verdict(
        "QPMW desk-scale run",
        start,
        Duration::from_secs(300),
        failures,
    );
}

#[test]
fn rebit_witness_values() {
    let start = Instant::now();
    let r = run(ExperimentConfig::new("rebit").with_trials(100));
    let mut failures = Vec::new();
    let product = stat(&r, "product_max_gap");
    expect(&mut failures, product <= 1e-12, || {
        format!("product states off 1/2 by {product}")
    });
    let (a, b) = (stat(&r, "phi_minus"), stat(&r, "phi_plus"));
    expect(&mut failures, (a - 1.0).abs() <= 1e-12, || {
        format!("Phi- gives {a}")
    });
    expect(&mut failures, b.abs() <= 1e-12, || {
        format!("Phi+ gives {b}")
    });
    verdict(
        "rebit witness values",
        start,
        Duration::from_secs(5),
        failures,
    );
}

#[test]
fn damage_lemma_subsets() {
    let start = Instant::now();
    let r = run(ExperimentConfig::new("damage-lemma")
        .with_param("ops", 3u64)
        .with_trials(100));
    let mut failures = failed_checks(&r, "");
    let slack = stat(&r, "min_subset_slack");
    expect(&mut failures, slack >= -1e-9, || {
        format!("subset bound violated by {}", -slack)
    });
    expect(&mut failures, r.trials.len() == 100, || {
        format!("ran {} sequences", r.trials.len())
    });
    verdict(
        "damage lemma over all subsets",
        start,
        Duration::from_secs(60),
        failures,
    );
}

/// Standard deviation of the two-sided geometric law with ratio e^{−ε}.
fn geometric_std(eps: f64) -> f64 {
    let r = (-eps).exp();
    (2.0 * r).sqrt() / (1.0 - r)
}

#[test]
fn composition_failure() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let n = 4096u64;
    for (eps, large) in [(0.3f64, true), (0.05, false)] {
        let r = run(ExperimentConfig::new("compose-fail")
            .with_param("eps", eps)
            .with_param("n", n)
            .with_trials(1000));
        let floor = geometric_std(eps);
        let rms = stat(&r, "rms_error");
        expect(
            &mut failures,
            (stat(&r, "noise_floor") - floor).abs() < 1e-9,
            || format!("eps={eps} floor mismatch"),
        );
        if large {
            expect(&mut failures, rms > 3.0 * floor, || {
                format!("eps={eps} rms {rms:.2} not above 3 x {floor:.2}")
            });
        } else {
            expect(&mut failures, rms <= 1.5 * floor, || {
                format!("eps={eps} rms {rms:.2} above 1.5 x {floor:.2}")
            });
        }
    }
    verdict(
        "composition failure",
        start,
        Duration::from_secs(60),
        failures,
    );
}
