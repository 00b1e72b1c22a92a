use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{group_by_x, mean_aggregate, rate_aggregate, Aggregate, ExperimentConfig, TrialRecord, TrialResult};
use crate::designs::{frame_potential, haar_frame_potential, make_design_sampler, phase_randomize, sandwich_distinguisher};
use crate::haar::{build_oracle_family, concentration_experiment, sample_haar_unitary, single_query_test_circuit, LevelBinding, MAX_LEVEL};
use crate::linalg::{run_circuit_exact, NoOracle, OracleIndex, QuantumCircuit, StateVector, Unitary};
use crate::qds::{unforgeability_game, AdversaryParams, AdversaryRegistry, SchemeRegistry};
use crate::seeds;
use crate::simhaar::{error_bound, sim_haar, SimHaarJob, SimHaarParams};
use crate::tomography::{process_tomography, SimulatedBox, TomographyRecord};
use crate::{Error, Result};

/// One kind of experiment: how to validate a config, lay out trials, run
/// one trial from its seed, and summarise.
pub trait Experiment: Send + Sync {
    fn id(&self) -> &str;
    fn metrics(&self) -> &'static [&'static str];
    fn validate(&self, cfg: &ExperimentConfig) -> Result<()>;
    /// Sweep coordinate of each trial, in trial order.
    fn plan(&self, cfg: &ExperimentConfig) -> Vec<f64>;
    fn run_trial(&self, cfg: &ExperimentConfig, x: f64, seed: u64) -> Result<TrialResult>;
    fn summarize(&self, cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<Aggregate>;
}

pub type ExperimentFactory = fn() -> Box<dyn Experiment>;

#[derive(Clone)]
pub struct ExperimentRegistry {
    entries: BTreeMap<String, ExperimentFactory>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        let mut r = ExperimentRegistry { entries: BTreeMap::new() };
        r.register("attack", || Box::new(Games { attack: true }));
        r.register("game-baseline", || Box::new(Games { attack: false }));
        r.register("concentration", || Box::new(Concentration));
        r.register("simhaar-audit", || Box::new(SimHaarAudit));
        r.register("tomography-audit", || Box::new(TomographyAudit));
        r.register("design-audit", || Box::new(DesignAudit));
        r
    }
}

impl ExperimentRegistry {
    pub fn register(&mut self, name: &str, factory: ExperimentFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn build(&self, name: &str) -> Result<Box<dyn Experiment>> {
        let f = self.entries.get(name).ok_or_else(|| Error::UnknownName {
            kind: "experiment",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        Ok(f())
    }
}

fn repeat(xs: impl IntoIterator<Item = f64>, trials: usize) -> Vec<f64> {
    xs.into_iter().flat_map(|x| std::iter::repeat_n(x, trials)).collect()
}

fn cap(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::CapViolation(msg()))
    }
}

struct Games {
    attack: bool,
}

impl Games {
    fn params(cfg: &ExperimentConfig) -> AdversaryParams {
        AdversaryParams {
            t: cfg.t,
            eta: cfg.eta,
            delta: cfg.delta,
            thresholds: cfg.thresholds,
            budget_constant: cfg.budget_constant,
            max_key_bits: cfg.caps.max_key_bits,
        }
    }

    fn adversary_name<'c>(&self, cfg: &'c ExperimentConfig) -> &'c str {
        if self.attack {
            "multi-time"
        } else {
            &cfg.adversary
        }
    }
}

impl Experiment for Games {
    fn id(&self) -> &str {
        if self.attack {
            "attack"
        } else {
            "game-baseline"
        }
    }

    fn metrics(&self) -> &'static [&'static str] {
        &["win-rate", "honest-retention", "candidate-hit-rate"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        AdversaryRegistry::default().build(self.adversary_name(cfg), &Self::params(cfg))?;
        for lambda in cfg.lambda_sweep() {
            let scheme = SchemeRegistry::default().build(&cfg.scheme, lambda)?;
            let levels = cfg.l_max.unwrap_or(scheme.oracle_levels().max(1));
            if levels < scheme.oracle_levels() {
                return Err(Error::Config(format!(
                    "l_max = {levels} is below the {} levels scheme {} needs at λ = {lambda}",
                    scheme.oracle_levels(),
                    cfg.scheme
                )));
            }
            cap(levels <= MAX_LEVEL, || format!("l_max = {levels} exceeds {MAX_LEVEL}"))?;
            let check_dim = 1usize << (2 * scheme.oracle_levels() + 1).min(63);
            cap(check_dim <= cfg.caps.max_dim, || format!("verifier checks need dimension {check_dim} at λ = {lambda}"))?;
            let messages = 1u64 << scheme.message_bits();
            cap(messages <= cfg.caps.max_messages, || format!("|M| = {messages} at λ = {lambda}"))?;
            if self.attack {
                cap(scheme.key_bits() <= cfg.caps.max_key_bits, || {
                    format!("{} key bits at λ = {lambda}", scheme.key_bits())
                })?;
            }
        }
        Ok(())
    }

    fn plan(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        repeat(cfg.lambda_sweep().into_iter().map(|l| l as f64), cfg.trials)
    }

    fn run_trial(&self, cfg: &ExperimentConfig, x: f64, seed: u64) -> Result<TrialResult> {
        let lambda = x as usize;
        let scheme = SchemeRegistry::default().build(&cfg.scheme, lambda)?;
        let adversary = AdversaryRegistry::default().build(self.adversary_name(cfg), &Self::params(cfg))?;
        let levels = cfg.l_max.unwrap_or(scheme.oracle_levels().max(1));
        let family = build_oracle_family(levels, seeds::derive(seed, seeds::ORACLE))?;
        let game = unforgeability_game(scheme.as_ref(), adversary.as_ref(), &family, seed)?;
        if let Some(budget) = cfg.caps.query_budget {
            cap(game.oracle_queries as f64 <= budget, || format!("{} oracle queries exceed {budget}", game.oracle_queries))?;
        }
        if let Some(attack) = &game.attack {
            for job in &attack.jobs {
                cap(job.within_poly_budget(), || {
                    format!("{} queries exceed the polynomial budget {:.3e}", job.oracle_queries, job.poly_budget)
                })?;
            }
        }
        Ok(TrialResult::Game(Box::new(game)))
    }

    fn summarize(&self, _cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for (x, group) in group_by_x(trials).into_values() {
            let games: Vec<_> = group
                .iter()
                .filter_map(|t| match &t.result {
                    TrialResult::Game(g) => Some(g),
                    _ => None,
                })
                .collect();
            let wins = games.iter().filter(|g| g.win).count();
            out.push(rate_aggregate("win-rate", x, wins, games.len()));
            let attacks: Vec<_> = games.iter().filter_map(|g| g.attack.as_ref().map(|a| (g, a))).collect();
            if !attacks.is_empty() {
                let kept = attacks.iter().filter(|(g, a)| a.trajectory.consistent.contains(&g.secret_key.value())).count();
                out.push(rate_aggregate("honest-retention", x, kept, attacks.len()));
                let hit = attacks.iter().filter(|(g, a)| a.trajectory.candidates.contains(&g.secret_key.value())).count();
                out.push(rate_aggregate("candidate-hit-rate", x, hit, attacks.len()));
            }
        }
        out
    }
}

struct Concentration;

impl Experiment for Concentration {
    fn id(&self) -> &str {
        "concentration"
    }

    fn metrics(&self) -> &'static [&'static str] {
        &["std-vs-n", "mean-vs-n"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        if cfg.samples < 2 {
            return Err(Error::Config("concentration needs samples ≥ 2".into()));
        }
        for &n in &cfg.ns {
            if n == 0 {
                return Err(Error::Config("concentration needs n ≥ 1".into()));
            }
            cap(n <= MAX_LEVEL && (1usize << n) <= cfg.caps.max_dim, || format!("n = {n} exceeds the dimension cap"))?;
        }
        Ok(())
    }

    fn plan(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        repeat(cfg.ns.iter().map(|&n| n as f64), cfg.trials)
    }

    fn run_trial(&self, cfg: &ExperimentConfig, x: f64, seed: u64) -> Result<TrialResult> {
        let n = x as usize;
        let c = single_query_test_circuit(n)?;
        let mut rng = seeds::rng(seeds::derive(seed, seeds::ORACLE));
        let report = concentration_experiment(&c, "single-query", n, cfg.samples, &mut rng)?;
        Ok(TrialResult::Concentration(report))
    }

    fn summarize(&self, _cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for (x, group) in group_by_x(trials).into_values() {
            let reports: Vec<_> = group
                .iter()
                .filter_map(|t| match &t.result {
                    TrialResult::Concentration(r) => Some(r),
                    _ => None,
                })
                .collect();
            let stds: Vec<f64> = reports.iter().map(|r| r.std).collect();
            let mut std = mean_aggregate("std-vs-n", x, &stds);
            if reports.len() == 1 {
                // Normal approximation to the sampling error of one std estimate.
                let r = reports[0];
                let half = 1.96 * r.std / (2.0 * (r.samples as f64 - 1.0)).sqrt();
                std.ci_low = (r.std - half).max(0.0);
                std.ci_high = r.std + half;
            }
            out.push(std);
            let means: Vec<f64> = reports.iter().flat_map(|r| r.values.iter().copied()).collect();
            out.push(mean_aggregate("mean-vs-n", x, &means));
        }
        out
    }
}

/// Three-wire, two-query circuit: a level-1 call indexed by wire 0 and a
/// controlled level-2 call, read out on wire 2.
pub fn simhaar_test_circuit() -> Result<QuantumCircuit> {
    let mut c = QuantumCircuit::new(3, 2)?;
    c.h(0)?;
    c.oracle(1, OracleIndex::Wires(vec![0]), &[1])?;
    c.cnot(1, 2)?;
    c.controlled_oracle(0, 2, OracleIndex::Fixed(1), &[1, 2])?;
    c.h(0)?;
    c.measure(&[2])?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimHaarTrial {
    pub job: SimHaarJob,
    /// `|Pr[C′(x)=1] − Pr[C^U(x)=1]|` for every basis input `x`.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub bound: f64,
    pub exceeded: bool,
    pub oracle_free: bool,
}

struct SimHaarAudit;

impl SimHaarAudit {
    fn params(cfg: &ExperimentConfig) -> Result<SimHaarParams> {
        Ok(SimHaarParams {
            budget_constant: cfg.budget_constant,
            forced_cutoff: cfg.forced_cutoff,
            ..SimHaarParams::new(cfg.eta.unwrap_or(4.0), cfg.delta.unwrap_or(0.05))?
        })
    }
}

impl Experiment for SimHaarAudit {
    fn id(&self) -> &str {
        "simhaar-audit"
    }

    fn metrics(&self) -> &'static [&'static str] {
        &["bound-failure-rate", "max-deviation"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        Self::params(cfg).map(|_| ()).map_err(|e| Error::Config(e.to_string()))
    }

    fn plan(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        repeat([cfg.eta.unwrap_or(4.0)], cfg.trials)
    }

    fn run_trial(&self, cfg: &ExperimentConfig, _x: f64, seed: u64) -> Result<TrialResult> {
        let params = Self::params(cfg)?;
        let c = simhaar_test_circuit()?;
        let family = build_oracle_family(2, seeds::derive(seed, seeds::ORACLE))?;
        let mut session = family.session();
        let out = sim_haar(&c, &params, &mut session, seeds::derive(seed, seeds::SIMHAAR))?;
        if let Some(budget) = cfg.caps.query_budget {
            cap(out.job.oracle_queries as f64 <= budget, || format!("{} queries exceed {budget}", out.job.oracle_queries))?;
        }
        cap(out.job.within_poly_budget(), || "Sim-Haar exceeded its polynomial query budget".into())?;
        let mut deviations = Vec::with_capacity(8);
        for x in 0..8 {
            let input = StateVector::basis(8, x)?;
            let truth = run_circuit_exact(&c, &input, &family)?;
            let sim = run_circuit_exact(&out.circuit, &input, &NoOracle)?;
            deviations.push((truth - sim).abs());
        }
        let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
        let bound = error_bound(params.eta, params.delta);
        Ok(TrialResult::SimHaar(SimHaarTrial {
            oracle_free: out.circuit.is_oracle_free(),
            job: out.job,
            deviations,
            max_deviation,
            bound,
            exceeded: max_deviation > bound,
        }))
    }

    fn summarize(&self, _cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for (x, group) in group_by_x(trials).into_values() {
            let runs: Vec<_> = group
                .iter()
                .filter_map(|t| match &t.result {
                    TrialResult::SimHaar(r) => Some(r),
                    _ => None,
                })
                .collect();
            let fails = runs.iter().filter(|r| r.exceeded).count();
            out.push(rate_aggregate("bound-failure-rate", x, fails, runs.len()));
            let devs: Vec<f64> = runs.iter().map(|r| r.max_deviation).collect();
            out.push(mean_aggregate("max-deviation", x, &devs));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyTrial {
    pub record: TomographyRecord,
    pub diamond_error: f64,
    pub success: bool,
    pub within_budget: bool,
}

struct TomographyAudit;

impl Experiment for TomographyAudit {
    fn id(&self) -> &str {
        "tomography-audit"
    }

    fn metrics(&self) -> &'static [&'static str] {
        &["success-rate", "diamond-error"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let d = cfg.tomography_dim;
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::Config(format!("tomography dimension {d} must be a power of two ≥ 2")));
        }
        cap(d <= cfg.caps.max_dim, || format!("tomography dimension {d}"))?;
        for v in [cfg.tomography_eps, cfg.tomography_eta] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("tomography ε and η must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    fn plan(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        repeat([cfg.tomography_eps], cfg.trials)
    }

    fn run_trial(&self, cfg: &ExperimentConfig, x: f64, seed: u64) -> Result<TrialResult> {
        let mut rng = seeds::rng(seeds::derive(seed, seeds::ORACLE));
        let truth = sample_haar_unitary(cfg.tomography_dim, &mut rng)?;
        let mut bb = SimulatedBox::new(&truth);
        let mut trng = seeds::rng(seeds::derive(seed, seeds::TOMOGRAPHY));
        let mut r = process_tomography(&mut bb, x, cfg.tomography_eta, cfg.budget_constant, &mut trng)?;
        let diamond_error = r.score_against(&truth)?;
        let record = r.record();
        Ok(TrialResult::Tomography(TomographyTrial {
            diamond_error,
            success: diamond_error <= 3.0 * x,
            within_budget: record.queries_used <= record.budget,
            record,
        }))
    }

    fn summarize(&self, _cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for (x, group) in group_by_x(trials).into_values() {
            let runs: Vec<_> = group
                .iter()
                .filter_map(|t| match &t.result {
                    TrialResult::Tomography(r) => Some(r),
                    _ => None,
                })
                .collect();
            out.push(rate_aggregate("success-rate", x, runs.iter().filter(|r| r.success).count(), runs.len()));
            let errs: Vec<f64> = runs.iter().map(|r| r.diamond_error).collect();
            out.push(mean_aggregate("diamond-error", x, &errs));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTrial {
    pub n: usize,
    pub t: usize,
    pub samples: usize,
    pub depth: usize,
    pub frame_potential_design: f64,
    pub frame_potential_haar: f64,
    pub haar_value: f64,
    /// Mean acceptance of the two-query controlled distinguisher.
    pub sandwich_design: f64,
    pub sandwich_haar: f64,
    /// `|E_design / E_Haar − 1|`.
    pub sandwich_deviation: f64,
    /// Largest acceptance change under `ω^j` phases on an uncontrolled circuit.
    pub phase_shift_max: f64,
}

struct DesignAudit;

/// Two uncontrolled queries to `U_{0,n}` around an entangling gate.
fn uncontrolled_probe(n: usize) -> Result<QuantumCircuit> {
    let mut c = QuantumCircuit::new(n + 1, n)?;
    let targets: Vec<usize> = (0..n).collect();
    c.h(n)?;
    c.oracle(n, OracleIndex::Fixed(0), &targets)?;
    c.cnot(n, 0)?;
    c.oracle(n, OracleIndex::Fixed(0), &targets)?;
    c.h(n)?;
    c.measure(&[0, n])?;
    Ok(c)
}

fn sandwich_mean(c: &QuantumCircuit, n: usize, us: &[Unitary]) -> Result<f64> {
    let input = StateVector::zero(n + 1)?;
    let mut total = 0.0;
    for u in us {
        total += run_circuit_exact(c, &input, &LevelBinding { level: n, unitary: u.clone() })?;
    }
    Ok(total / us.len() as f64)
}

impl Experiment for DesignAudit {
    fn id(&self) -> &str {
        "design-audit"
    }

    fn metrics(&self) -> &'static [&'static str] {
        &["frame-potential-gap", "sandwich-deviation"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        if cfg.samples < 2 {
            return Err(Error::Config("design audit needs samples ≥ 2".into()));
        }
        for &(n, t) in &cfg.design_points {
            make_design_sampler(n, t, cfg.design_eps).map_err(|e| Error::Config(e.to_string()))?;
            cap((1usize << (n + 1)) <= cfg.caps.max_dim, || format!("design width n = {n}"))?;
        }
        Ok(())
    }

    fn plan(&self, cfg: &ExperimentConfig) -> Vec<f64> {
        // x encodes the point index; the trial reads (n, t) back from it.
        repeat((0..cfg.design_points.len()).map(|i| i as f64), cfg.trials)
    }

    fn run_trial(&self, cfg: &ExperimentConfig, x: f64, seed: u64) -> Result<TrialResult> {
        let (n, t) = cfg.design_points[x as usize];
        let sampler = make_design_sampler(n, t, cfg.design_eps)?;
        let mut drng = seeds::rng(seeds::derive(seed, seeds::DESIGN));
        let mut hrng = seeds::rng(seeds::derive(seed, seeds::ORACLE));
        let design: Vec<Unitary> = (0..cfg.samples).map(|_| sampler.sample(drng.next_u64())).collect::<Result<_>>()?;
        let haar: Vec<Unitary> = (0..cfg.samples).map(|_| sample_haar_unitary(1 << n, &mut hrng)).collect::<Result<_>>()?;
        let frame_potential_design = frame_potential(&design, t)?;
        let frame_potential_haar = frame_potential(&haar, t)?;
        let sandwich = sandwich_distinguisher(n)?;
        let sandwich_design = sandwich_mean(&sandwich, n, &design)?;
        let sandwich_haar = sandwich_mean(&sandwich, n, &haar)?;
        let probe = uncontrolled_probe(n)?;
        let input = StateVector::zero(n + 1)?;
        let mut phase_shift_max = 0.0f64;
        for u in design.iter().take(8) {
            let base = run_circuit_exact(&probe, &input, &LevelBinding { level: n, unitary: u.clone() })?;
            for j in 1..=t as u64 {
                let v = phase_randomize(u, t, j);
                let p = run_circuit_exact(&probe, &input, &LevelBinding { level: n, unitary: v })?;
                phase_shift_max = phase_shift_max.max((p - base).abs());
            }
        }
        Ok(TrialResult::Design(DesignTrial {
            n,
            t,
            samples: cfg.samples,
            depth: sampler.depth,
            frame_potential_design,
            frame_potential_haar,
            haar_value: haar_frame_potential(t),
            sandwich_design,
            sandwich_haar,
            sandwich_deviation: (sandwich_design / sandwich_haar - 1.0).abs(),
            phase_shift_max,
        }))
    }

    fn summarize(&self, _cfg: &ExperimentConfig, trials: &[TrialRecord]) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for (_, group) in group_by_x(trials).into_values() {
            let runs: Vec<_> = group
                .iter()
                .filter_map(|t| match &t.result {
                    TrialResult::Design(r) => Some(r),
                    _ => None,
                })
                .collect();
            let Some(first) = runs.first() else { continue };
            let x = first.n as f64;
            let gaps: Vec<f64> = runs.iter().map(|r| (r.frame_potential_design - r.frame_potential_haar).abs()).collect();
            out.push(mean_aggregate("frame-potential-gap", x, &gaps));
            let devs: Vec<f64> = runs.iter().map(|r| r.sandwich_deviation).collect();
            out.push(mean_aggregate("sandwich-deviation", x, &devs));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{plot_table, run_experiment};

    #[test]
    fn registry_lists_all_kinds() {
        let names = ExperimentRegistry::default().names();
        for k in ["attack", "game-baseline", "concentration", "simhaar-audit", "tomography-audit", "design-audit"] {
            assert!(names.contains(&k.to_string()));
        }
    }

    #[test]
    fn concentration_rows_per_n() {
        let cfg = ExperimentConfig {
            experiment: "concentration".into(),
            ns: vec![2, 4],
            samples: 20,
            trials: 1,
            ..Default::default()
        };
        let report = run_experiment(&cfg).unwrap();
        let table = plot_table(&report, "std-vs-n").unwrap();
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn caps_are_enforced_before_launch() {
        let mut cfg = ExperimentConfig { experiment: "concentration".into(), ns: vec![8], ..Default::default() };
        cfg.caps.max_dim = 64;
        assert!(matches!(run_experiment(&cfg), Err(Error::CapViolation(_))));
        let cfg = ExperimentConfig { scheme: "nope".into(), ..Default::default() };
        assert!(matches!(run_experiment(&cfg), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn baseline_games_run() {
        let cfg = ExperimentConfig {
            experiment: "game-baseline".into(),
            adversary: "leaked-key".into(),
            lambda: 3,
            trials: 4,
            ..Default::default()
        };
        let report = run_experiment(&cfg).unwrap();
        let rate = report.aggregate("win-rate").next().unwrap();
        assert_eq!(rate.y, 1.0);
    }
}
