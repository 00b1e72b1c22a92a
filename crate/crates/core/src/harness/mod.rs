//! Reproducible experiment runs: configuration, the experiment registry,
//! versioned reports, replay, plot tables and trajectory audits.
//!
//! Seed tree: the master seed gives trial `i` the seed
//! `trial_seed(master, i)`; inside a trial every module draws from
//! `derive(trial, TAG)` with its own tag (`ORACLE`, `GAME`, `ATTACK`,
//! `SIMHAAR`, `TOMOGRAPHY`, `DESIGN`).

mod experiments;

pub use experiments::{
    simhaar_test_circuit, Experiment, ExperimentRegistry, DesignTrial, SimHaarTrial, TomographyTrial,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{good_signer_violations, shrinking_violations, structure_violations, Thresholds};
use crate::haar::ConcentrationReport;
use crate::qds::GameResult;
use crate::seeds;
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Largest state dimension any circuit may reach.
    pub max_dim: usize,
    /// Largest message space enumerated.
    pub max_messages: u64,
    /// Largest key space enumerated, in bits.
    pub max_key_bits: usize,
    /// Oracle queries allowed per trial; `None` uses the Sim-Haar polynomial bound.
    pub query_budget: Option<f64>,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_dim: 1 << crate::linalg::MAX_QUBITS, max_messages: 1 << 10, max_key_bits: 12, query_budget: None }
    }
}

/// Experiment description, read from TOML. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub lambda: usize,
    /// Sweep over `λ`; empty means `[lambda]`.
    pub lambdas: Vec<usize>,
    /// Oracle levels to materialise; `None` means what the scheme needs.
    pub l_max: Option<usize>,
    pub scheme: String,
    /// Adversary for `game-baseline`.
    pub adversary: String,
    pub t: Option<usize>,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub caps: Caps,
    pub thresholds: Thresholds,
    pub budget_constant: f64,
    /// Qubit counts for `concentration`.
    pub ns: Vec<usize>,
    /// Haar or design samples per trial.
    pub samples: usize,
    pub tomography_dim: usize,
    pub tomography_eps: f64,
    pub tomography_eta: f64,
    /// `(n, t)` points for `design-audit`.
    pub design_points: Vec<(usize, usize)>,
    pub design_eps: f64,
    /// Cutoff override for `simhaar-audit`.
    pub forced_cutoff: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "attack".into(),
            lambda: 4,
            lambdas: Vec::new(),
            l_max: None,
            scheme: "toy-weak".into(),
            adversary: "random-signature".into(),
            t: None,
            eta: None,
            delta: None,
            trials: 10,
            seed: 0,
            output: None,
            caps: Caps::default(),
            thresholds: Thresholds::default(),
            budget_constant: crate::tomography::DEFAULT_BUDGET_CONSTANT,
            ns: vec![2, 4, 6, 8],
            samples: 200,
            tomography_dim: 4,
            tomography_eps: 0.2,
            tomography_eta: 0.05,
            design_points: vec![(2, 2), (3, 2)],
            design_eps: 0.01,
            forced_cutoff: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lambda_sweep(&self) -> Vec<usize> {
        if self.lambdas.is_empty() {
            vec![self.lambda]
        } else {
            self.lambdas.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrialResult {
    Game(Box<GameResult>),
    Concentration(ConcentrationReport),
    SimHaar(SimHaarTrial),
    Tomography(TomographyTrial),
    Design(DesignTrial),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    /// Sweep coordinate (`λ`, `n`, ...).
    pub x: f64,
    pub result: TrialResult,
}

/// One row of a plot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: String,
    pub x: f64,
    pub y: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != REPORT_FORMAT_VERSION {
            return Err(Error::ReportVersion { found, expected: REPORT_FORMAT_VERSION });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Canonical text of each trial, the unit of reproducibility.
    pub fn trial_texts(&self) -> Result<Vec<String>> {
        self.trials.iter().map(|t| Ok(serde_json::to_string(t)?)).collect()
    }

    pub fn aggregate(&self, metric: &str) -> impl Iterator<Item = &Aggregate> {
        let metric = metric.to_string();
        self.aggregates.iter().filter(move |a| a.metric == metric)
    }
}

/// Wilson score interval at 95% for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let center = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

pub(crate) fn rate_aggregate(metric: &str, x: f64, successes: usize, n: usize) -> Aggregate {
    let (ci_low, ci_high) = wilson_interval(successes, n);
    let y = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
    Aggregate { metric: metric.into(), x, y, ci_low, ci_high, n }
}

/// Mean with a normal-approximation 95% interval.
pub(crate) fn mean_aggregate(metric: &str, x: f64, values: &[f64]) -> Aggregate {
    let (mean, std) = crate::haar::mean_std(values);
    let half = if values.len() > 1 { 1.96 * std / (values.len() as f64).sqrt() } else { 0.0 };
    Aggregate { metric: metric.into(), x, y: mean, ci_low: mean - half, ci_high: mean + half, n: values.len() }
}

pub(crate) fn group_by_x(trials: &[TrialRecord]) -> BTreeMap<u64, (f64, Vec<&TrialRecord>)> {
    let mut out: BTreeMap<u64, (f64, Vec<&TrialRecord>)> = BTreeMap::new();
    for t in trials {
        out.entry(t.x.to_bits()).or_insert_with(|| (t.x, Vec::new())).1.push(t);
    }
    out
}

/// Runs every trial (in parallel, results in trial order), aggregates, and
/// writes the report when `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(&ExperimentRegistry::default(), config)
}

pub fn run_experiment_with(registry: &ExperimentRegistry, config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let exp = registry.build(&config.experiment)?;
    exp.validate(config)?;
    let plan = exp.plan(config);
    log::info!("{}: {} trials", exp.id(), plan.len());
    let trials: Vec<TrialRecord> = plan
        .par_iter()
        .enumerate()
        .map(|(index, &x)| {
            let seed = seeds::trial_seed(config.seed, index as u64);
            let result = exp.run_trial(config, x, seed)?;
            Ok(TrialRecord { index, seed, x, result })
        })
        .collect::<Result<_>>()?;
    let aggregates = exp.summarize(config, &trials);
    let report = RunReport {
        format_version: REPORT_FORMAT_VERSION,
        config: config.clone(),
        trials,
        aggregates,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = &config.output {
        report.write(path)?;
    }
    Ok(report)
}

/// Per-trial comparison of a stored report against a fresh run of its config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub trials: usize,
    pub mismatched: Vec<usize>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }
}

pub fn replay(stored: &RunReport) -> Result<ReplayOutcome> {
    let config = ExperimentConfig { output: None, ..stored.config.clone() };
    let fresh = run_experiment(&config)?;
    let (a, b) = (stored.trial_texts()?, fresh.trial_texts()?);
    let mut mismatched: Vec<usize> = a.iter().zip(&b).enumerate().filter(|(_, (x, y))| x != y).map(|(i, _)| i).collect();
    for i in a.len().min(b.len())..a.len().max(b.len()) {
        mismatched.push(i);
    }
    Ok(ReplayOutcome { trials: a.len().max(b.len()), mismatched })
}

/// CSV with columns `x,y,ci_low,ci_high` for one metric.
pub fn plot_table(report: &RunReport, metric: &str) -> Result<String> {
    let exp = ExperimentRegistry::default().build(&report.config.experiment)?;
    if !exp.metrics().contains(&metric) {
        return Err(Error::UnknownName { kind: "metric", name: metric.to_string(), known: exp.metrics().join(", ") });
    }
    let mut out = String::from("x,y,ci_low,ci_high\n");
    for a in report.aggregate(metric) {
        out.push_str(&format!("{},{},{},{}\n", a.x, a.y, a.ci_low, a.ci_high));
    }
    Ok(out)
}

pub fn emit_plot_data(report: &RunReport, metric: &str, path: &Path) -> Result<()> {
    fs::write(path, plot_table(report, metric)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub trials: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks the shrinking and good-signer properties, and trajectory
/// structure, on every stored attack trajectory without recomputation.
pub fn audit(report: &RunReport) -> AuditReport {
    let mut out = AuditReport { trials: report.trials.len(), trajectories: 0, steps: 0, violations: Vec::new() };
    for t in &report.trials {
        let TrialResult::Game(game) = &t.result else { continue };
        let Some(attack) = &game.attack else { continue };
        let traj = &attack.trajectory;
        out.trajectories += 1;
        out.steps += traj.steps.len();
        for j in shrinking_violations(traj) {
            out.violations.push(format!("trial {}: shrinking fails at step {j}", t.index));
        }
        for j in good_signer_violations(traj, game.secret_key.value()) {
            out.violations.push(format!("trial {}: honest key not a good signer at step {j}", t.index));
        }
        for v in structure_violations(traj) {
            out.violations.push(format!("trial {}: {v}", t.index));
        }
        if game.win && game.forgery.is_some_and(|f| game.transcript.iter().any(|(m, _)| *m == f.message)) {
            out.violations.push(format!("trial {}: winning forgery on a queried message", t.index));
        }
    }
    out
}

/// Plain-text summary table of the aggregates.
pub fn summary_table(report: &RunReport) -> String {
    let mut out = format!(
        "{} | {} trials | {:.2}s\n{:<24} {:>10} {:>10} {:>10} {:>10} {:>6}\n",
        report.config.experiment,
        report.trials.len(),
        report.wall_clock_seconds,
        "metric",
        "x",
        "y",
        "ci_low",
        "ci_high",
        "n"
    );
    for a in &report.aggregates {
        out.push_str(&format!(
            "{:<24} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>6}\n",
            a.metric, a.x, a.y, a.ci_low, a.ci_high, a.n
        ));
    }
    out
}
