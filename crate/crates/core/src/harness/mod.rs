//! Named, seeded experiments with JSON and CSV reports.

mod experiments;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid_arg, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub seed: u64,
    /// Falls back to the experiment's own default when absent.
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
            seed: 0,
            trials: None,
            output_path: None,
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = Some(trials);
        self
    }

    pub fn with_output(mut self, path: impl Into<PathBuf>) -> Self {
        self.output_path = Some(path.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if find_experiment(&self.name).is_none() {
            return Err(Error::UnknownExperiment(self.name.clone()));
        }
        if self.trials == Some(0) {
            return Err(invalid_arg("trials must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| invalid_arg(format!("parameter `{key}` must be a number"))),
        }
    }

    pub(crate) fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default),
            Some(v) => match v.as_u64() {
                Some(x) => Ok(x as usize),
                None => match v.as_f64() {
                    Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
                    _ => Err(invalid_arg(format!(
                        "parameter `{key}` must be a nonnegative integer"
                    ))),
                },
            },
        }
    }

    pub(crate) fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(_) => self.f64(key, 0.0).map(Some),
        }
    }

    pub(crate) fn string(&self, key: &str, default: &str) -> Result<String> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(invalid_arg(format!("parameter `{key}` must be a string"))),
        }
    }

    pub(crate) fn trials_or(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    /// Independent generator for trial `i`, seeded with seed + i.
    pub(crate) fn rng(&self, i: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(i as u64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
}

/// One declared bound and whether the measured value meets it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Above => value > bound,
        };
        Self {
            name: name.into(),
            value,
            relation,
            bound,
            pass,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::AtMost, bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::AtLeast, bound)
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::Above, bound)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub trials: Vec<Value>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_clock_secs: f64,
}

/// What an experiment body returns before timing and bookkeeping.
#[derive(Default)]
pub(crate) struct Outcome {
    pub trials: Vec<Value>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn stat(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn record<T: Serialize>(&mut self, t: &T) -> Result<()> {
        self.trials.push(serde_json::to_value(t)?);
        Ok(())
    }
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned two-column summary followed by the checks.
    pub fn to_csv(&self) -> String {
        let width = self
            .summary
            .keys()
            .chain(self.checks.iter().map(|c| &c.name))
            .map(String::len)
            .max()
            .unwrap_or(0);
        let mut out = String::from("metric,value\n");
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k:<width$},{v}");
        }
        out.push_str("\ncheck,value,relation,bound,pass\n");
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
                Relation::Above => ">",
            };
            let _ = writeln!(
                out,
                "{:<width$},{},{rel},{},{}",
                c.name, c.value, c.bound, c.pass
            );
        }
        out
    }

    /// Writes the JSON report to `path` and the CSV summary beside it.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()?)?;
        std::fs::write(path.with_extension("csv"), self.to_csv())?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// The library operation the experiment exercises.
    pub anchor: &'static str,
}

type Body = fn(&ExperimentConfig) -> Result<Outcome>;

const REGISTRY: &[(ExperimentInfo, Body)] = &[
    (
        ExperimentInfo {
            name: "lsigma-dp",
            description: "exact DP parameter of the noisy count over all bit-flip neighbours (sigma, n)",
            anchor: "classical::dp_epsilon",
        },
        experiments::lsigma_dp,
    ),
    (
        ExperimentInfo {
            name: "lsigma-gentle",
            description: "largest damage of the noisy count on random product states against 2*sqrt(2)*sqrt(n)/sigma (sigma, n)",
            anchor: "measure::NoisyCountMeasurement::overlap_from_weights",
        },
        experiments::lsigma_gentle,
    ),
    (
        ExperimentInfo {
            name: "classical-lemma",
            description: "posterior KL and TV of the noisy count on product bits against 2*eps^2*n and 2*eps*sqrt(n) (sigma, n)",
            anchor: "classical::posterior_kl_audit",
        },
        experiments::classical_lemma,
    ),
    (
        ExperimentInfo {
            name: "hellinger-identity",
            description: "post-measurement overlap equals one minus the squared Hellinger distance (sigma, n)",
            anchor: "measure::NoisyCountMeasurement::condition_pure",
        },
        experiments::hellinger_identity,
    ),
    (
        ExperimentInfo {
            name: "notgentle",
            description: "damage of L_{n/2} on the cat mixture at outcome 0 (n)",
            anchor: "measure::NoisyCountMeasurement::condition_density",
        },
        experiments::notgentle,
    ),
    (
        ExperimentInfo {
            name: "notgentleprod",
            description: "damage of L_{sqrt n} on the uniform state at outcome 0 (n)",
            anchor: "classical::ClassicalMechanism::NoisyCount",
        },
        experiments::notgentleprod,
    ),
    (
        ExperimentInfo {
            name: "rr",
            description: "randomized response: DP parameter and damage on random qubits (beta)",
            anchor: "measure::RandomizedResponse",
        },
        experiments::rr,
    ),
    (
        ExperimentInfo {
            name: "rebit",
            description: "rebit witness on real product states and two entangled states",
            anchor: "measure::rebit_witness",
        },
        experiments::rebit,
    ),
    (
        ExperimentInfo {
            name: "bell",
            description: "Bell-pair projection: near-trivial on product states, unbounded on entangled neighbours (n)",
            anchor: "measure::BellProjection",
        },
        experiments::bell,
    ),
    (
        ExperimentInfo {
            name: "parity",
            description: "noisy block parity: exact DP parameter and separation of block-parity extremes (n, k, sigma)",
            anchor: "measure::NoisyParity",
        },
        experiments::parity,
    ),
    (
        ExperimentInfo {
            name: "qpmw",
            description: "online shadow tomography of a qubit: accuracy, damage, coupling and update cap (m, eps, n, mu, mode)",
            anchor: "learner::qpmw_run",
        },
        experiments::qpmw,
    ),
    (
        ExperimentInfo {
            name: "qpmw-modes",
            description: "real, ideal and hybrid executions on shared streams (m, eps, n, mu)",
            anchor: "learner::Mode",
        },
        experiments::qpmw_modes,
    ),
    (
        ExperimentInfo {
            name: "mmw-mistakes",
            description: "updates of the learner against a greedy adversary (d, eps, eta)",
            anchor: "learner::greedy_mistakes",
        },
        experiments::mmw_mistakes,
    ),
    (
        ExperimentInfo {
            name: "damage-lemma",
            description: "acceptance-probability and final-state bounds for three conditioned operations on two qubits",
            anchor: "learner::damage_bounds",
        },
        experiments::damage_lemma,
    ),
    (
        ExperimentInfo {
            name: "compose-bounds",
            description: "two randomized responses in conjugate bases: relative accuracy and DP against the composition bound (beta)",
            anchor: "measure::compose_dp",
        },
        experiments::compose_bounds,
    ),
    (
        ExperimentInfo {
            name: "compose-fail",
            description: "count estimate after randomized response against the noise floor (eps, n)",
            anchor: "measure::ComposeFailure",
        },
        experiments::compose_fail,
    ),
    (
        ExperimentInfo {
            name: "bounds-table",
            description: "every bound calculator over a grid of arguments",
            anchor: "measure::Bound::evaluate",
        },
        experiments::bounds_table,
    ),
];

/// Registered experiments in a fixed order.
pub fn list_experiments() -> Vec<ExperimentInfo> {
    REGISTRY.iter().map(|(info, _)| *info).collect()
}

fn find_experiment(name: &str) -> Option<&'static (ExperimentInfo, Body)> {
    REGISTRY.iter().find(|(info, _)| info.name == name)
}

/// Runs a configured experiment and, if an output path is set, writes the
/// JSON report there with a CSV summary next to it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (_, body) = find_experiment(&config.name)
        .ok_or_else(|| Error::UnknownExperiment(config.name.clone()))?;
    let start = Instant::now();
    let outcome = body(config)?;
    let report = ExperimentReport {
        name: config.name.clone(),
        config: config.clone(),
        passed: outcome.checks.iter().all(|c| c.pass),
        trials: outcome.trials,
        summary: outcome.summary,
        checks: outcome.checks,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = &config.output_path {
        report.write(path)?;
    }
    Ok(report)
}
