//! The multi-time forger: transcript collection, oracle removal for the two
//! verification circuits, the candidate search over the key space, and the
//! forgery.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::haar::OracleFamily;
use crate::linalg::{NoOracle, OracleBinding};
use crate::qds::{check_probability, composed_check, Adversary, AdversaryOutput, AdversaryParams, Bits, GameContext, QdsScheme, VerifyCheck};
use crate::seeds;
use crate::simhaar::{adversary_parameters, compile_circuit, substitute_keys, SimHaarJob, SimHaarParams, SubstitutedOracle};
use crate::{Error, Result};

/// `t = 40λ` signing queries.
pub const QUERY_FACTOR: usize = 40;

/// Floor on `δ` where `1/300 − e^{−λ/2}` is too small or negative.
pub const DELTA_FLOOR: f64 = 1e-3;

/// How the stingy test compares `|friends_sk|` against `|S_j|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StingyRule {
    /// `2·|friends_sk| ≤ |S_j| − 1`, counting only the other members.
    ExcludeSelf,
    /// `2·|friends_sk| ≤ |S_j|`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// `Pr ≥ consistent` on every transcript pair.
    pub consistent: f64,
    /// Inner test of the friend relation, strict `>`.
    pub friend: f64,
    /// Inner test of the accept relation, `≥`.
    pub accept: f64,
    /// Fraction of `M` a relation must hold on, `≥`.
    pub count_fraction: f64,
    pub stingy: StingyRule,
    /// Half-width of the band around each threshold counted as near-threshold.
    pub guard_band: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            consistent: 0.9,
            friend: 0.1,
            accept: 0.1,
            count_fraction: 0.1,
            stingy: StingyRule::ExcludeSelf,
            guard_band: 1e-9,
        }
    }
}

impl Thresholds {
    fn near(&self, p: f64, threshold: f64) -> bool {
        (p - threshold).abs() <= self.guard_band
    }

    fn count_ok(&self, count: usize, messages: u64) -> bool {
        count as f64 >= self.count_fraction * messages as f64
    }

    fn is_stingy(&self, friends: usize, size: usize) -> bool {
        match self.stingy {
            StingyRule::ExcludeSelf => 2 * friends < size,
            StingyRule::Literal => 2 * friends <= size,
        }
    }
}

/// Exact acceptance probabilities of the two compiled verification circuits.
pub trait AcceptanceSource: Sync {
    fn num_keys(&self) -> u64;
    fn num_messages(&self) -> u64;
    /// `Pr[VerPKGen′(sk, m, σ) = 1]`.
    fn ver_pkgen(&self, sk: u64, m: u64, sig: Bits) -> Result<f64>;
    /// `Pr[VerPKGenSign′(sk, m, sk′) = 1]`.
    fn ver_pkgen_sign(&self, sk: u64, m: u64, signer: u64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Table {
    VerPkGen,
    VerPkGenSign,
}

/// Tables backed by the oracle-free circuits from two independent
/// compilations, memoised per verifier check by circuit fingerprint.
pub struct CompiledTables<'s> {
    scheme: &'s dyn QdsScheme,
    ver_pkgen: SubstitutedOracle,
    ver_pkgen_sign: SubstitutedOracle,
    cache: Mutex<HashMap<(Table, u64), f64>>,
}

impl<'s> CompiledTables<'s> {
    pub fn new(scheme: &'s dyn QdsScheme, ver_pkgen: SubstitutedOracle, ver_pkgen_sign: SubstitutedOracle) -> Self {
        CompiledTables { scheme, ver_pkgen, ver_pkgen_sign, cache: Mutex::new(HashMap::new()) }
    }

    pub fn ver_pkgen_oracle(&self) -> &SubstitutedOracle {
        &self.ver_pkgen
    }

    pub fn ver_pkgen_sign_oracle(&self) -> &SubstitutedOracle {
        &self.ver_pkgen_sign
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    fn oracle(&self, table: Table) -> &SubstitutedOracle {
        match table {
            Table::VerPkGen => &self.ver_pkgen,
            Table::VerPkGenSign => &self.ver_pkgen_sign,
        }
    }

    fn check(&self, table: Table, sk: Bits, check: &VerifyCheck) -> Result<f64> {
        let composed = composed_check(self.scheme, sk, check)?;
        let key = (table, composed.fingerprint());
        if let Some(&p) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(p);
        }
        let compiled = compile_circuit(&composed, self.oracle(table))?;
        let p = check_probability(&compiled, &NoOracle)?.clamp(0.0, 1.0);
        self.cache.lock().expect("cache lock").insert(key, p);
        Ok(p)
    }

    fn verify(&self, table: Table, sk: Bits, m: Bits, sig: Bits) -> Result<f64> {
        let program = self.scheme.verify_program(m, sig)?;
        if program.reject {
            return Ok(0.0);
        }
        let mut p = 1.0;
        for check in &program.checks {
            p *= self.check(table, sk, check)?.powi(check.reps as i32);
        }
        Ok(p)
    }

    fn key(&self, sk: u64) -> Result<Bits> {
        Bits::new(sk, self.scheme.key_bits())
    }

    fn message(&self, m: u64) -> Result<Bits> {
        Bits::new(m, self.scheme.message_bits())
    }
}

impl AcceptanceSource for CompiledTables<'_> {
    fn num_keys(&self) -> u64 {
        1 << self.scheme.key_bits()
    }

    fn num_messages(&self) -> u64 {
        1 << self.scheme.message_bits()
    }

    fn ver_pkgen(&self, sk: u64, m: u64, sig: Bits) -> Result<f64> {
        self.verify(Table::VerPkGen, self.key(sk)?, self.message(m)?, sig)
    }

    fn ver_pkgen_sign(&self, sk: u64, m: u64, signer: u64) -> Result<f64> {
        let (sk, m) = (self.key(sk)?, self.message(m)?);
        let mut p = 0.0;
        for (sig, w) in self.scheme.sign_distribution(self.key(signer)?, m, &self.ver_pkgen_sign)? {
            p += w * self.verify(Table::VerPkGenSign, sk, m, sig)?;
        }
        Ok(p.clamp(0.0, 1.0))
    }
}

/// Random acceptance tables for exercising the candidate search in
/// isolation. Every key is consistent with every transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTables {
    keys: u64,
    messages: u64,
    /// `values[(sk·keys + signer)·messages + m]`.
    values: Vec<f64>,
    honest: Option<u64>,
}

impl SyntheticTables {
    /// Each ordered pair gets a random affinity `a`; each message then
    /// accepts with probability drawn from `[1/10, 1]` w.p. `a`, else from
    /// `[0, 1/10)`. A planted honest key is accepted by everyone on every
    /// message with probability in `[1/2, 1]`.
    pub fn random(keys: u64, messages: u64, honest: Option<u64>, rng: &mut dyn RngCore) -> Result<Self> {
        if keys == 0 || messages == 0 || honest.is_some_and(|h| h >= keys) {
            return Err(Error::invalid("synthetic tables need keys, messages and an in-range honest key"));
        }
        let mut values = vec![0.0; (keys * keys * messages) as usize];
        for sk in 0..keys {
            for signer in 0..keys {
                let affinity: f64 = rng.random();
                for m in 0..messages {
                    let idx = ((sk * keys + signer) * messages + m) as usize;
                    values[idx] = if sk == signer {
                        1.0
                    } else if Some(signer) == honest {
                        rng.random_range(0.5..=1.0)
                    } else if rng.random::<f64>() < affinity {
                        rng.random_range(0.1..=1.0)
                    } else {
                        rng.random_range(0.0..0.1)
                    };
                }
            }
        }
        Ok(SyntheticTables { keys, messages, values, honest })
    }

    pub fn from_fn(keys: u64, messages: u64, f: impl Fn(u64, u64, u64) -> f64) -> Self {
        let mut values = Vec::with_capacity((keys * keys * messages) as usize);
        for sk in 0..keys {
            for signer in 0..keys {
                for m in 0..messages {
                    values.push(f(sk, m, signer));
                }
            }
        }
        SyntheticTables { keys, messages, values, honest: None }
    }

    pub fn honest(&self) -> Option<u64> {
        self.honest
    }
}

impl AcceptanceSource for SyntheticTables {
    fn num_keys(&self) -> u64 {
        self.keys
    }

    fn num_messages(&self) -> u64 {
        self.messages
    }

    fn ver_pkgen(&self, _sk: u64, _m: u64, _sig: Bits) -> Result<f64> {
        Ok(1.0)
    }

    fn ver_pkgen_sign(&self, sk: u64, m: u64, signer: u64) -> Result<f64> {
        if sk >= self.keys || signer >= self.keys || m >= self.messages {
            return Err(Error::invalid("synthetic table index out of range"));
        }
        Ok(self.values[((sk * self.keys + signer) * self.messages + m) as usize])
    }
}

/// Keys whose compiled verifier accepts every transcript pair with
/// probability at least `thresholds.consistent`.
pub fn build_consistent(
    tables: &dyn AcceptanceSource,
    transcript: &[(u64, Bits)],
    thresholds: &Thresholds,
) -> Result<(Vec<u64>, u64)> {
    let pairs: BTreeSet<(u64, Bits)> = transcript.iter().copied().collect();
    let results: Vec<(u64, bool, u64)> = (0..tables.num_keys())
        .into_par_iter()
        .map(|sk| {
            let mut near = 0;
            for &(m, sig) in &pairs {
                let p = tables.ver_pkgen(sk, m, sig)?;
                near += thresholds.near(p, thresholds.consistent) as u64;
                if p < thresholds.consistent {
                    return Ok((sk, false, near));
                }
            }
            Ok((sk, true, near))
        })
        .collect::<Result<_>>()?;
    let near = results.iter().map(|r| r.2).sum();
    Ok((results.into_iter().filter(|r| r.1).map(|r| r.0).collect(), near))
}

/// `friends_sk` and `accept_{sk,j}` for every `sk ∈ S_j`, in the order of `set`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relations {
    pub friends: Vec<Vec<u64>>,
    pub accept: Vec<Vec<u64>>,
    pub near_threshold: u64,
}

pub fn friends_and_accept(tables: &dyn AcceptanceSource, set: &[u64], thresholds: &Thresholds) -> Result<Relations> {
    let n = set.len();
    let messages = tables.num_messages();
    // votes[a][b] = (#m with VPGS(a, m, b) > friend, #m with VPGS(a, m, b) ≥ accept, near events)
    let votes: Vec<Vec<(usize, usize, u64)>> = set
        .par_iter()
        .map(|&a| {
            set.iter()
                .map(|&b| {
                    if a == b {
                        return Ok((0, 0, 0));
                    }
                    let (mut gt, mut ge, mut near) = (0, 0, 0);
                    for m in 0..messages {
                        let p = tables.ver_pkgen_sign(a, m, b)?;
                        gt += (p > thresholds.friend) as usize;
                        ge += (p >= thresholds.accept) as usize;
                        near += (thresholds.near(p, thresholds.friend) || thresholds.near(p, thresholds.accept)) as u64;
                    }
                    Ok((gt, ge, near))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut friends = vec![Vec::new(); n];
    let mut accept = vec![Vec::new(); n];
    let mut near_threshold = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            near_threshold += votes[i][j].2;
            if thresholds.count_ok(votes[i][j].0, messages) {
                friends[i].push(set[j]);
            }
            // Roles flipped: set[j] verifies signatures made with set[i].
            if thresholds.count_ok(votes[j][i].1, messages) {
                accept[i].push(set[j]);
            }
        }
    }
    Ok(Relations { friends, accept, near_threshold })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShrinkStep {
    pub set: Vec<u64>,
    pub friends: Vec<Vec<u64>>,
    pub accept: Vec<Vec<u64>>,
    pub stingy: Vec<u64>,
    pub good_signer: Vec<u64>,
    pub next: Vec<u64>,
    pub candidate: Option<u64>,
}

/// `S_{j+1} = stingy_j ∩ goodSigner_j`, plus one uniform candidate from it.
pub fn shrink_step(set: &[u64], relations: &Relations, thresholds: &Thresholds, rng: &mut dyn RngCore) -> ShrinkStep {
    let mut stingy = Vec::new();
    let mut good_signer = Vec::new();
    for (i, &sk) in set.iter().enumerate() {
        if thresholds.is_stingy(relations.friends[i].len(), set.len()) {
            stingy.push(sk);
        }
        if relations.accept[i].len() == set.len() - 1 {
            good_signer.push(sk);
        }
    }
    let good: BTreeSet<u64> = good_signer.iter().copied().collect();
    let next: Vec<u64> = stingy.iter().copied().filter(|k| good.contains(k)).collect();
    let candidate = (!next.is_empty()).then(|| next[rng.random_range(0..next.len())]);
    ShrinkStep {
        set: set.to_vec(),
        friends: relations.friends.clone(),
        accept: relations.accept.clone(),
        stingy,
        good_signer,
        next,
        candidate,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateTrajectory {
    pub consistent: Vec<u64>,
    pub steps: Vec<ShrinkStep>,
    pub candidates: Vec<u64>,
    /// Iteration index at which `S_{j+1}` came out empty.
    pub halted_at: Option<usize>,
    pub max_iterations: usize,
    pub near_threshold: u64,
}

/// Runs the shrinking loop from `S_1 = start` for up to `iterations` steps.
pub fn shrink_from(
    tables: &dyn AcceptanceSource,
    start: Vec<u64>,
    iterations: usize,
    thresholds: &Thresholds,
    seed: u64,
) -> Result<CandidateTrajectory> {
    let mut rng = seeds::rng(seed);
    let mut traj = CandidateTrajectory {
        consistent: start.clone(),
        steps: Vec::new(),
        candidates: Vec::new(),
        halted_at: None,
        max_iterations: iterations,
        near_threshold: 0,
    };
    let mut set = start;
    for j in 0..iterations {
        if set.is_empty() {
            traj.halted_at = Some(j);
            break;
        }
        let rel = friends_and_accept(tables, &set, thresholds)?;
        traj.near_threshold += rel.near_threshold;
        let step = shrink_step(&set, &rel, thresholds, &mut rng);
        set = step.next.clone();
        if let Some(c) = step.candidate {
            traj.candidates.push(c);
        }
        let empty = step.next.is_empty();
        traj.steps.push(step);
        if empty {
            traj.halted_at = Some(j);
            break;
        }
    }
    Ok(traj)
}

/// `Consistent`, then `λ²` shrinking iterations. `seed` is the randomness
/// handed to the search.
pub fn find_candidates(
    tables: &dyn AcceptanceSource,
    transcript: &[(u64, Bits)],
    lambda: usize,
    thresholds: &Thresholds,
    seed: u64,
) -> Result<CandidateTrajectory> {
    let (consistent, near) = build_consistent(tables, transcript, thresholds)?;
    let mut traj = shrink_from(tables, consistent, lambda * lambda, thresholds, seed)?;
    traj.near_threshold += near;
    Ok(traj)
}

/// Indices `j` where `|S_j| > 1` and `10·|S_{j+1}| > 9·|S_j|`.
pub fn shrinking_violations(traj: &CandidateTrajectory) -> Vec<usize> {
    traj.steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.set.len() != 1 && 10 * s.next.len() > 9 * s.set.len())
        .map(|(j, _)| j)
        .collect()
}

/// Indices `j` where `sk* ∈ S_j` but `sk* ∉ goodSigner_j`; empty when
/// `sk* ∉ Consistent`.
pub fn good_signer_violations(traj: &CandidateTrajectory, honest: u64) -> Vec<usize> {
    if !traj.consistent.contains(&honest) {
        return Vec::new();
    }
    traj.steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.set.contains(&honest) && !s.good_signer.contains(&honest))
        .map(|(j, _)| j)
        .collect()
}

/// Structural checks: `S_{j+1} ⊆ S_j ⊆ Consistent`, chained sets, and at
/// most `max_iterations` steps.
pub fn structure_violations(traj: &CandidateTrajectory) -> Vec<String> {
    let mut out = Vec::new();
    if traj.steps.len() > traj.max_iterations {
        out.push(format!("{} steps exceed the cap {}", traj.steps.len(), traj.max_iterations));
    }
    let consistent: BTreeSet<u64> = traj.consistent.iter().copied().collect();
    let mut prev: Option<&Vec<u64>> = None;
    for (j, s) in traj.steps.iter().enumerate() {
        let set: BTreeSet<u64> = s.set.iter().copied().collect();
        if !set.is_subset(&consistent) {
            out.push(format!("S_{j} leaves Consistent"));
        }
        if let Some(p) = prev {
            if p != &s.set {
                out.push(format!("S_{j} differs from the previous step's output"));
            }
        }
        if !s.next.iter().all(|k| set.contains(k)) {
            out.push(format!("S_{} is not inside S_{j}", j + 1));
        }
        prev = Some(&s.next);
    }
    out
}

/// `(9/10)^{λ²}·2^λ < 1`.
pub fn iteration_bound_holds(lambda: usize) -> bool {
    let l = lambda as f64;
    0.9f64.powf(l * l) * l.exp2() < 1.0
}

/// One transcript of `t` uniform messages from `M = [0, size)`, conditioned
/// on not covering `M`. Returns the messages.
pub fn sample_transcript_messages(t: usize, size: u64, rng: &mut dyn RngCore) -> Result<Vec<u64>> {
    if size < 2 {
        return Err(Error::invalid("message space needs at least two messages"));
    }
    loop {
        let excluded = rng.random_range(0..size);
        let msgs: Vec<u64> = (0..t)
            .map(|_| {
                let r = rng.random_range(0..size - 1);
                if r >= excluded {
                    r + 1
                } else {
                    r
                }
            })
            .collect();
        let covered: BTreeSet<u64> = msgs.iter().copied().collect();
        let missing = size - covered.len() as u64;
        if rng.random::<f64>() < 1.0 / missing as f64 {
            return Ok(msgs);
        }
    }
}

/// `p_{sk*,sk} = Pr_m[Verify(PKGen(sk*), m, Sign(sk, m)) = 1]` under the
/// true oracle. Analysis quantity for the harness only.
pub fn honest_agreement(scheme: &dyn QdsScheme, family: &OracleFamily, honest: Bits, sk: Bits) -> Result<f64> {
    let mut total = 0.0;
    let all: Vec<Bits> = Bits::all(scheme.message_bits()).collect();
    for &m in &all {
        total += crate::qds::ver_pkgen_sign_probability(scheme, honest, m, sk, family as &dyn OracleBinding)?;
    }
    Ok(total / all.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub lambda: usize,
    pub t: usize,
    pub eta: f64,
    pub delta: f64,
    /// `1/300 − e^{−λ/2}` before flooring.
    pub delta_formula: f64,
    pub delta_floored: bool,
    pub thresholds: Thresholds,
    pub attack_seed: u64,
    pub compile_seeds: [u64; 2],
    pub search_seed: u64,
    /// Cutoffs `d` of the two compilations.
    pub cutoffs: [usize; 2],
    pub jobs: Vec<SimHaarJob>,
    pub key_space: u64,
    pub message_space: u64,
    pub trajectory: CandidateTrajectory,
    pub chosen_key: Option<u64>,
    pub forged_message: Option<u64>,
    pub oracle_queries: u64,
}

/// The full multi-time attack as a game adversary.
pub struct MultiTimeAttack {
    params: AdversaryParams,
}

impl MultiTimeAttack {
    pub fn new(params: AdversaryParams) -> Self {
        MultiTimeAttack { params }
    }
}

impl Adversary for MultiTimeAttack {
    fn id(&self) -> &str {
        if self.params.t == Some(1) {
            "single-query"
        } else {
            "multi-time"
        }
    }

    fn forge(&self, ctx: &mut GameContext<'_>, rng: &mut dyn RngCore) -> Result<AdversaryOutput> {
        let scheme = ctx.scheme();
        let lambda = scheme.lambda();
        if (scheme.message_bits() as f64) < 2.0 * (lambda as f64).log2() {
            return Err(Error::Config(format!(
                "message length {} is below 2·log₂ λ for λ = {lambda}",
                scheme.message_bits()
            )));
        }
        if scheme.key_bits() > self.params.max_key_bits {
            return Err(Error::CapViolation(format!(
                "key space of {} bits exceeds the enumeration cap of {} bits",
                scheme.key_bits(),
                self.params.max_key_bits
            )));
        }
        let message_space = 1u64 << scheme.message_bits();
        let t = self.params.t.unwrap_or(QUERY_FACTOR * lambda);

        // Step 1: signatures on t messages, conditioned on leaving one out.
        let mut transcript = Vec::with_capacity(t);
        for m in sample_transcript_messages(t, message_space, rng)? {
            let mb = Bits::new(m, scheme.message_bits())?;
            transcript.push((m, ctx.sign(mb)?));
        }

        // Steps 2-3: two independent oracle removals.
        let (default_eta, delta_formula) = adversary_parameters(lambda);
        let eta = self.params.eta.unwrap_or(default_eta);
        let delta = self.params.delta.unwrap_or(delta_formula.max(DELTA_FLOOR));
        let sim = SimHaarParams { budget_constant: self.params.budget_constant, ..SimHaarParams::new(eta, delta)? };
        let level = scheme.oracle_levels();
        let keys: BTreeSet<(usize, u64)> = (0..1u64 << level).map(|k| (level, k)).collect();
        let attack_seed = rng.next_u64();
        let compile_seeds = [seeds::derive(attack_seed, 1), seeds::derive(attack_seed, 2)];
        let start = ctx.session().queries();
        let (vpg, job_a) =
            substitute_keys(&keys, scheme.space(), scheme.verpkgen_queries(), &sim, ctx.session(), compile_seeds[0])?;
        let (vpgs, job_b) =
            substitute_keys(&keys, scheme.space(), scheme.verpkgen_queries(), &sim, ctx.session(), compile_seeds[1])?;
        let oracle_queries = ctx.session().queries() - start;
        let tables = CompiledTables::new(scheme, vpg, vpgs);

        // Step 4: candidate search with its randomness passed in.
        let search_seed = rng.next_u64();
        let trajectory = find_candidates(&tables, &transcript, lambda, &self.params.thresholds, search_seed)?;

        let mut report = AttackReport {
            lambda,
            t,
            eta,
            delta,
            delta_formula,
            delta_floored: self.params.delta.is_none() && delta_formula < DELTA_FLOOR,
            thresholds: self.params.thresholds,
            attack_seed,
            compile_seeds,
            search_seed,
            cutoffs: [job_a.cutoff, job_b.cutoff],
            jobs: vec![job_a, job_b],
            key_space: 1 << scheme.key_bits(),
            message_space,
            trajectory,
            chosen_key: None,
            forged_message: None,
            oracle_queries,
        };

        // Step 5: forge on an unqueried message with a sampled candidate.
        if report.trajectory.candidates.is_empty() {
            return Ok(AdversaryOutput { attack: Some(report), ..AdversaryOutput::give_up("no candidates") });
        }
        let cands = &report.trajectory.candidates;
        let sk = cands[rng.random_range(0..cands.len())];
        let queried: BTreeSet<u64> = transcript.iter().map(|(m, _)| *m).collect();
        let fresh: Vec<u64> = (0..message_space).filter(|m| !queried.contains(m)).collect();
        let m = fresh[rng.random_range(0..fresh.len())];
        let (skb, mb) = (Bits::new(sk, scheme.key_bits())?, Bits::new(m, scheme.message_bits())?);
        let sig = scheme.sign(skb, mb, ctx.family(), rng)?;
        report.chosen_key = Some(sk);
        report.forged_message = Some(m);
        Ok(AdversaryOutput { attack: Some(report), ..AdversaryOutput::forge(mb, sig) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ones(keys: u64, messages: u64) -> SyntheticTables {
        SyntheticTables::from_fn(keys, messages, |_, _, _| 1.0)
    }

    #[test]
    fn empty_transcript_keeps_every_key() {
        let t = all_ones(8, 4);
        let (c, _) = build_consistent(&t, &[], &Thresholds::default()).unwrap();
        assert_eq!(c, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn all_ones_table_halts_immediately() {
        let t = all_ones(6, 16);
        let th = Thresholds::default();
        let set: Vec<u64> = (0..6).collect();
        let rel = friends_and_accept(&t, &set, &th).unwrap();
        let step = shrink_step(&set, &rel, &th, &mut seeds::rng(0));
        assert_eq!(step.good_signer, set);
        assert!(step.stingy.is_empty());
        assert!(step.next.is_empty() && step.candidate.is_none());
    }

    #[test]
    fn singleton_is_a_fixed_point() {
        let t = all_ones(4, 4);
        let th = Thresholds::default();
        let rel = friends_and_accept(&t, &[2], &th).unwrap();
        assert!(rel.friends[0].is_empty() && rel.accept[0].is_empty());
        let step = shrink_step(&[2], &rel, &th, &mut seeds::rng(0));
        assert_eq!((step.stingy, step.good_signer, step.next, step.candidate), (vec![2], vec![2], vec![2], Some(2)));
    }

    #[test]
    fn universally_accepted_key() {
        let t = SyntheticTables::from_fn(5, 8, |_, _, signer| if signer == 3 { 1.0 } else { 0.0 });
        let set: Vec<u64> = (0..5).collect();
        let rel = friends_and_accept(&t, &set, &Thresholds::default()).unwrap();
        assert_eq!(rel.accept[3], vec![0, 1, 2, 4]);
        assert!(rel.accept[0].is_empty());
    }

    #[test]
    fn strict_and_non_strict_inner_tests() {
        let t = SyntheticTables::from_fn(2, 10, |_, _, _| 0.1);
        let rel = friends_and_accept(&t, &[0, 1], &Thresholds::default()).unwrap();
        assert!(rel.friends[0].is_empty());
        assert_eq!(rel.accept[0], vec![1]);
        assert_eq!(rel.near_threshold, 20);
    }

    #[test]
    fn stingy_rules() {
        let ex = Thresholds::default();
        assert!(ex.is_stingy(0, 1) && ex.is_stingy(0, 2) && !ex.is_stingy(1, 2) && ex.is_stingy(2, 5));
        let lit = Thresholds { stingy: StingyRule::Literal, ..ex };
        assert!(lit.is_stingy(1, 2));
    }

    #[test]
    fn iteration_bound_arithmetic() {
        // λ²·ln(10/9) > λ·ln 2 first holds at λ = 7.
        assert!((2..7).all(|l| !iteration_bound_holds(l)));
        assert!((7..40).all(iteration_bound_holds));
    }

    #[test]
    fn transcript_never_covers_message_space() {
        let mut rng = seeds::rng(3);
        for _ in 0..200 {
            let msgs = sample_transcript_messages(40, 8, &mut rng).unwrap();
            assert_eq!(msgs.len(), 40);
            assert!(msgs.iter().collect::<BTreeSet<_>>().len() < 8);
        }
        assert!(sample_transcript_messages(1, 1, &mut rng).is_err());
    }

    #[test]
    fn planted_synthetic_instances_shrink() {
        let th = Thresholds::default();
        for s in 0..50 {
            let mut rng = seeds::rng(s);
            let t = SyntheticTables::random(8, 16, Some(5), &mut rng).unwrap();
            let traj = shrink_from(&t, (0..8).collect(), 9, &th, s).unwrap();
            assert!(shrinking_violations(&traj).is_empty());
            assert!(good_signer_violations(&traj, 5).is_empty());
            assert!(structure_violations(&traj).is_empty());
        }
    }
}
