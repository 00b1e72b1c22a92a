//! Oracle removal: every oracle call of a circuit is replaced by a concrete
//! unitary, learned by process tomography at small levels and drawn from a
//! keyed approximate design at large levels.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{keyed_family, make_design_sampler, MAX_DESIGN_ORDER, MAX_DESIGN_QUBITS};
use crate::haar::OracleSession;
use crate::linalg::{Gate, OracleBinding, OracleIndex, QuantumCircuit, Unitary};
use crate::seeds;
use crate::tomography::{process_tomography, OracleBox, DEFAULT_BUDGET_CONSTANT};
use crate::{Error, Result};

/// Floor applied to the per-unitary tomography failure budget `μ`.
pub const MU_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimHaarParams {
    pub eta: f64,
    pub delta: f64,
    pub budget_constant: f64,
    /// Replaces the computed cutoff; used to exercise the design branch.
    pub forced_cutoff: Option<usize>,
}

impl SimHaarParams {
    pub fn new(eta: f64, delta: f64) -> Result<Self> {
        let p = SimHaarParams { eta, delta, budget_constant: DEFAULT_BUDGET_CONSTANT, forced_cutoff: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0 / 3.0) {
            return Err(Error::invalid(format!("δ = {} outside (0, 1/3)", self.delta)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid(format!("η = {} must be positive", self.eta)));
        }
        if !(self.budget_constant.is_finite() && self.budget_constant > 0.0) {
            return Err(Error::invalid("tomography budget constant must be positive"));
        }
        Ok(())
    }
}

/// `d = ⌈log₂(192·(η+s)·T²/δ² + 2)⌉`.
pub fn compute_cutoff(eta: f64, delta: f64, space: usize, queries: usize) -> usize {
    let t = queries as f64;
    (192.0 / (delta * delta) * (eta + space as f64) * t * t + 2.0).log2().ceil() as usize
}

/// Additive error bound `3δ + e^{−η/2}` on every basis input.
pub fn error_bound(eta: f64, delta: f64) -> f64 {
    3.0 * delta + (-eta / 2.0).exp()
}

/// Failure probability allowed alongside [`error_bound`], `2e^{−η}`.
pub fn failure_bound(eta: f64) -> f64 {
    2.0 * (-eta).exp()
}

/// Upper bound on the oracle queries tomography can spend:
/// `K·(8/7)·8X³·(T/δ)·(ln d + 2(η+s) + 14)` with `X = 192(η+s)T²/δ² + 2`.
pub fn poly_query_budget(eta: f64, delta: f64, space: usize, queries: usize, budget_constant: f64) -> f64 {
    let t = queries.max(1) as f64;
    let x = 192.0 * (eta + space as f64) * t * t / (delta * delta) + 2.0;
    let d = compute_cutoff(eta, delta, space, queries).max(1) as f64;
    budget_constant * (8.0 / 7.0) * 8.0 * x.powi(3) * (t / delta) * (d.ln() + 2.0 * (eta + space as f64) + 14.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Tomography,
    Design,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub level: usize,
    pub method: Method,
    pub keys: usize,
    /// Tomography accuracy `δ/T`, or the design accuracy target.
    pub eps: f64,
    pub mu: Option<f64>,
    pub mu_floored: bool,
    pub queries: u64,
    pub all_converged: bool,
    pub design_order: Option<usize>,
    pub design_depth: Option<usize>,
}

/// Parameters, cutoff, per-level plan and query ledger of one compilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimHaarJob {
    pub eta: f64,
    pub delta: f64,
    pub space: usize,
    pub circuit_queries: usize,
    pub cutoff: usize,
    pub computed_cutoff: usize,
    pub seed: u64,
    pub budget_constant: f64,
    pub levels: Vec<LevelPlan>,
    pub oracle_queries: u64,
    pub poly_budget: f64,
}

impl SimHaarJob {
    pub fn within_poly_budget(&self) -> bool {
        (self.oracle_queries as f64) <= self.poly_budget
    }
}

/// The replacement unitaries, keyed by `(level, key)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubstitutedOracle {
    entries: BTreeMap<(usize, u64), Unitary>,
}

impl SubstitutedOracle {
    pub fn get(&self, level: usize, key: u64) -> Option<&Unitary> {
        self.entries.get(&(level, key))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl OracleBinding for SubstitutedOracle {
    fn resolve(&self, level: usize, key: u64) -> Option<&Unitary> {
        self.get(level, key)
    }
}

fn key_seed(seed: u64, level: usize, key: u64) -> u64 {
    seeds::derive(seeds::derive(seed, seeds::SIMHAAR), ((level as u64) << 48) | key)
}

/// Learns or designs a replacement for every key in `keys`, for a circuit
/// family of space `space` making `queries` oracle calls.
pub fn substitute_keys(
    keys: &BTreeSet<(usize, u64)>,
    space: usize,
    queries: usize,
    params: &SimHaarParams,
    session: &mut OracleSession<'_>,
    seed: u64,
) -> Result<(SubstitutedOracle, SimHaarJob)> {
    params.validate()?;
    let computed_cutoff = compute_cutoff(params.eta, params.delta, space, queries);
    let cutoff = params.forced_cutoff.unwrap_or(computed_cutoff);
    let mut by_level: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for &(level, key) in keys {
        if level > space {
            return Err(Error::invalid(format!("circuit references level {level} beyond its space {space}")));
        }
        by_level.entry(level).or_default().push(key);
    }

    let family = session.family();
    let t = queries.max(1);
    let mut entries = BTreeMap::new();
    let mut levels = Vec::new();
    let start = session.queries();
    for (level, keys) in by_level {
        if level <= cutoff {
            let eps = params.delta / t as f64;
            let raw_mu = (-2.0 * (params.eta + space as f64)).exp() / cutoff.max(1) as f64;
            let mu = raw_mu.max(MU_FLOOR);
            let learned: Vec<(u64, Unitary, u64, bool)> = keys
                .par_iter()
                .map(|&key| {
                    let mut local = family.session();
                    let mut bb = OracleBox::new(&mut local, level, key)?;
                    let mut rng = seeds::rng(key_seed(seed, level, key));
                    let r = process_tomography(&mut bb, eps, mu, params.budget_constant, &mut rng)?;
                    Ok((key, r.estimate, r.queries_used, r.converged))
                })
                .collect::<Result<_>>()?;
            let mut used = 0;
            let mut all_converged = true;
            for (key, u, q, conv) in learned {
                session.charge(q);
                used += q;
                all_converged &= conv;
                entries.insert((level, key), u);
            }
            levels.push(LevelPlan {
                level,
                method: Method::Tomography,
                keys: keys.len(),
                eps,
                mu: Some(mu),
                mu_floored: raw_mu < MU_FLOOR,
                queries: used,
                all_converged,
                design_order: None,
                design_depth: None,
            });
        } else {
            if level > MAX_DESIGN_QUBITS {
                return Err(Error::CapViolation(format!(
                    "design branch at level {level} exceeds {MAX_DESIGN_QUBITS} qubits"
                )));
            }
            let order = t.min(MAX_DESIGN_ORDER);
            let eps = (params.delta / (space as f64 * (space as f64).exp2())).min(0.5);
            let sampler = make_design_sampler(level, order, eps)?;
            let depth = sampler.depth;
            let fam = keyed_family(level, t, sampler, seeds::derive(seed, level as u64))?;
            for &key in &keys {
                entries.insert((level, key), fam.unitary(key)?);
            }
            levels.push(LevelPlan {
                level,
                method: Method::Design,
                keys: keys.len(),
                eps,
                mu: None,
                mu_floored: false,
                queries: 0,
                all_converged: true,
                design_order: Some(order),
                design_depth: Some(depth),
            });
        }
    }
    let job = SimHaarJob {
        eta: params.eta,
        delta: params.delta,
        space,
        circuit_queries: queries,
        cutoff,
        computed_cutoff,
        seed,
        budget_constant: params.budget_constant,
        levels,
        oracle_queries: session.queries() - start,
        poly_budget: poly_query_budget(params.eta, params.delta, space, queries, params.budget_constant),
    };
    Ok((SubstitutedOracle { entries }, job))
}

/// `C′`: each oracle call becomes a literal gate; calls indexed by wires
/// become multiplexers over the whole level.
pub fn compile_circuit(c: &QuantumCircuit, oracle: &SubstitutedOracle) -> Result<QuantumCircuit> {
    use crate::linalg::LinalgError;
    let lookup = |level: usize, key: u64| {
        oracle.get(level, key).cloned().ok_or(LinalgError::UnresolvedPlaceholder { level, key })
    };
    Ok(c.map_oracles(|call| {
        let controls: Vec<usize> = call.control.into_iter().collect();
        Ok(match &call.index {
            OracleIndex::Fixed(k) => {
                Gate::Unitary { matrix: lookup(call.level, *k)?, wires: call.targets.clone(), controls }
            }
            OracleIndex::Wires(index) => Gate::Multiplexed {
                index: index.clone(),
                targets: call.targets.clone(),
                controls,
                blocks: (0..1u64 << call.level).map(|k| lookup(call.level, k)).collect::<std::result::Result<_, _>>()?,
            },
        })
    })?)
}

#[derive(Debug, Clone)]
pub struct SimHaarOutput {
    pub circuit: QuantumCircuit,
    pub oracle: SubstitutedOracle,
    pub job: SimHaarJob,
}

/// Compiles `c` into an oracle-free circuit using forward queries through
/// `session`.
pub fn sim_haar(c: &QuantumCircuit, params: &SimHaarParams, session: &mut OracleSession<'_>, seed: u64) -> Result<SimHaarOutput> {
    let keys = c.addressed_keys();
    let (oracle, job) = substitute_keys(&keys, c.num_qubits(), c.query_count(), params, session, seed)?;
    let circuit = compile_circuit(c, &oracle)?;
    debug_assert!(circuit.is_oracle_free());
    Ok(SimHaarOutput { circuit, oracle, job })
}

/// The adversary's parameters `η = λ` and `δ = 1/300 − e^{−λ/2}`.
pub fn adversary_parameters(lambda: usize) -> (f64, f64) {
    let l = lambda as f64;
    (l, 1.0 / 300.0 - (-l / 2.0).exp())
}
