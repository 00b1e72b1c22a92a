//! The multi-time unforgeability game, baseline adversaries and the
//! correctness audit.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ver_pkgen_probability, ver_pkgen_sign_probability, Bits, QdsScheme};
use crate::attack::{AttackReport, MultiTimeAttack, Thresholds};
use crate::haar::{OracleFamily, OracleSession};
use crate::linalg::StateVector;
use crate::seeds;
use crate::{Error, Result};

/// Pass mark for the correctness audit.
pub const CORRECTNESS_THRESHOLD: f64 = 0.99;

/// Message sample size above which the audit stops enumerating.
pub const EXHAUSTIVE_MESSAGE_LIMIT: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forgery {
    pub message: Bits,
    pub signature: Bits,
}

/// What an adversary hands back at the end of the game.
#[derive(Debug, Clone, Default)]
pub struct AdversaryOutput {
    pub forgery: Option<Forgery>,
    pub reason: Option<String>,
    pub attack: Option<AttackReport>,
}

impl AdversaryOutput {
    pub fn forge(message: Bits, signature: Bits) -> Self {
        AdversaryOutput { forgery: Some(Forgery { message, signature }), ..Default::default() }
    }

    pub fn give_up(reason: impl Into<String>) -> Self {
        AdversaryOutput { reason: Some(reason.into()), ..Default::default() }
    }
}

/// Tunables shared by all adversaries; each reads what it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversaryParams {
    /// Signing queries; `None` means `40λ`.
    pub t: Option<usize>,
    /// Sim-Haar `η`; `None` means `λ`.
    pub eta: Option<f64>,
    /// Sim-Haar `δ`; `None` means `1/300 − e^{−λ/2}` floored.
    pub delta: Option<f64>,
    pub thresholds: Thresholds,
    pub budget_constant: f64,
    /// Largest key space the attack will enumerate, in bits.
    pub max_key_bits: usize,
}

impl Default for AdversaryParams {
    fn default() -> Self {
        AdversaryParams {
            t: None,
            eta: None,
            delta: None,
            thresholds: Thresholds::default(),
            budget_constant: crate::tomography::DEFAULT_BUDGET_CONSTANT,
            max_key_bits: 12,
        }
    }
}

/// Challenger state visible to the adversary: public key copies, the
/// signing oracle and forward access to the oracle family.
pub struct GameContext<'a> {
    scheme: &'a dyn QdsScheme,
    session: OracleSession<'a>,
    secret_key: Bits,
    signer_rng: ChaCha8Rng,
    transcript: Vec<(Bits, Bits)>,
    leaked: bool,
}

impl<'a> GameContext<'a> {
    pub fn scheme(&self) -> &'a dyn QdsScheme {
        self.scheme
    }

    pub fn family(&self) -> &'a OracleFamily {
        self.session.family()
    }

    pub fn session(&mut self) -> &mut OracleSession<'a> {
        &mut self.session
    }

    /// One copy of each public-key block; further copies are identical.
    pub fn public_key(&self) -> Result<Vec<StateVector>> {
        super::pk_block_states(self.scheme, self.secret_key, self.session.family())
    }

    pub fn sign(&mut self, m: Bits) -> Result<Bits> {
        let sig = self.scheme.sign(self.secret_key, m, self.session.family(), &mut self.signer_rng)?;
        self.transcript.push((m, sig));
        Ok(sig)
    }

    pub fn transcript(&self) -> &[(Bits, Bits)] {
        &self.transcript
    }

    /// Hands over `sk*`; the game records the leak.
    pub fn leak_secret_key(&mut self) -> Bits {
        self.leaked = true;
        self.secret_key
    }
}

pub trait Adversary: Send + Sync {
    fn id(&self) -> &str;
    fn forge(&self, ctx: &mut GameContext<'_>, rng: &mut dyn RngCore) -> Result<AdversaryOutput>;
}

/// Queries one message and submits the answer unchanged.
pub struct Replay;

impl Adversary for Replay {
    fn id(&self) -> &str {
        "replay"
    }

    fn forge(&self, ctx: &mut GameContext<'_>, rng: &mut dyn RngCore) -> Result<AdversaryOutput> {
        let m = Bits::random(ctx.scheme().message_bits(), rng);
        let sig = ctx.sign(m)?;
        Ok(AdversaryOutput::forge(m, sig))
    }
}

/// No queries; uniform message and uniform signature.
pub struct RandomSignature;

impl Adversary for RandomSignature {
    fn id(&self) -> &str {
        "random-signature"
    }

    fn forge(&self, ctx: &mut GameContext<'_>, rng: &mut dyn RngCore) -> Result<AdversaryOutput> {
        let m = Bits::random(ctx.scheme().message_bits(), rng);
        let sig = Bits::random(ctx.scheme().signature_bits(), rng);
        Ok(AdversaryOutput::forge(m, sig))
    }
}

/// Reads `sk*` and signs a fresh message honestly.
pub struct LeakedKey;

impl Adversary for LeakedKey {
    fn id(&self) -> &str {
        "leaked-key"
    }

    fn forge(&self, ctx: &mut GameContext<'_>, rng: &mut dyn RngCore) -> Result<AdversaryOutput> {
        let sk = ctx.leak_secret_key();
        let m = Bits::random(ctx.scheme().message_bits(), rng);
        let sig = ctx.scheme().sign(sk, m, ctx.family(), rng)?;
        Ok(AdversaryOutput::forge(m, sig))
    }
}

pub type AdversaryFactory = fn(&AdversaryParams) -> Result<Box<dyn Adversary>>;

/// Name → constructor table for adversaries.
#[derive(Clone)]
pub struct AdversaryRegistry {
    entries: BTreeMap<String, AdversaryFactory>,
}

impl Default for AdversaryRegistry {
    fn default() -> Self {
        let mut r = AdversaryRegistry { entries: BTreeMap::new() };
        r.register("replay", |_| Ok(Box::new(Replay)));
        r.register("random-signature", |_| Ok(Box::new(RandomSignature)));
        r.register("leaked-key", |_| Ok(Box::new(LeakedKey)));
        r.register("multi-time", |p| Ok(Box::new(MultiTimeAttack::new(p.clone()))));
        r.register("single-query", |p| Ok(Box::new(MultiTimeAttack::new(AdversaryParams { t: Some(1), ..p.clone() }))));
        r
    }
}

impl AdversaryRegistry {
    pub fn register(&mut self, name: &str, factory: AdversaryFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn build(&self, name: &str, params: &AdversaryParams) -> Result<Box<dyn Adversary>> {
        let f = self.entries.get(name).ok_or_else(|| Error::UnknownName {
            kind: "adversary",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        f(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub lambda: usize,
    pub scheme: String,
    pub adversary: String,
    pub seed: u64,
    pub oracle_seed: u64,
    pub secret_key: Bits,
    pub transcript: Vec<(Bits, Bits)>,
    pub forgery: Option<Forgery>,
    /// Exact acceptance probability of the forgery; the verdict is one draw.
    pub accept_probability: f64,
    pub win: bool,
    pub reason: Option<String>,
    pub leaked: bool,
    pub oracle_queries: u64,
    pub attack: Option<AttackReport>,
}

/// Plays one game. `sk*` and the verdict draw come from the `GAME`
/// substream of `seed`, the adversary's coins from the `ATTACK` substream.
pub fn unforgeability_game(
    scheme: &dyn QdsScheme,
    adversary: &dyn Adversary,
    family: &OracleFamily,
    seed: u64,
) -> Result<GameResult> {
    if family.l_max() < scheme.oracle_levels() {
        return Err(Error::invalid(format!(
            "scheme {} needs oracle levels up to {}, family has {}",
            scheme.id(),
            scheme.oracle_levels(),
            family.l_max()
        )));
    }
    let game_seed = seeds::derive(seed, seeds::GAME);
    let mut game_rng = seeds::rng(game_seed);
    let secret_key = scheme.keygen(&mut game_rng);
    let mut ctx = GameContext {
        scheme,
        session: family.session(),
        secret_key,
        signer_rng: seeds::rng(seeds::derive(game_seed, 1)),
        transcript: Vec::new(),
        leaked: false,
    };
    let mut adv_rng = seeds::rng(seeds::derive(seed, seeds::ATTACK));
    let out = adversary.forge(&mut ctx, &mut adv_rng)?;

    let queried: BTreeSet<Bits> = ctx.transcript.iter().map(|(m, _)| *m).collect();
    let mut result = GameResult {
        lambda: scheme.lambda(),
        scheme: scheme.id().to_string(),
        adversary: adversary.id().to_string(),
        seed,
        oracle_seed: family.seed(),
        secret_key,
        transcript: ctx.transcript.clone(),
        forgery: out.forgery,
        accept_probability: 0.0,
        win: false,
        reason: out.reason,
        leaked: ctx.leaked,
        oracle_queries: ctx.session.queries(),
        attack: out.attack,
    };
    let Some(forgery) = out.forgery else {
        result.reason.get_or_insert_with(|| "no forgery".to_string());
        return Ok(result);
    };
    if queried.contains(&forgery.message) {
        result.reason = Some("queried message".to_string());
        return Ok(result);
    }
    match ver_pkgen_probability(scheme, secret_key, forgery.message, forgery.signature, family) {
        Ok(p) => {
            result.accept_probability = p;
            result.win = game_rng.random::<f64>() < p;
            if !result.win {
                result.reason.get_or_insert_with(|| "verification rejected".to_string());
            }
        }
        Err(Error::InvalidParameter(msg)) => result.reason = Some(format!("malformed forgery: {msg}")),
        Err(e) => return Err(e),
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    pub scheme: String,
    pub lambda: usize,
    pub trials: usize,
    /// Minimum over sampled keys of the exact acceptance, per message.
    pub per_message: Vec<(Bits, f64)>,
    pub min_acceptance: f64,
    pub pass: bool,
}

fn message_sample(bits: usize) -> Vec<Bits> {
    let size = 1u64 << bits;
    if size <= EXHAUSTIVE_MESSAGE_LIMIT {
        return Bits::all(bits).collect();
    }
    let stride = size / EXHAUSTIVE_MESSAGE_LIMIT;
    let mut out: BTreeSet<Bits> = (0..EXHAUSTIVE_MESSAGE_LIMIT)
        .map(|i| Bits::new(i * stride, bits).expect("in range"))
        .collect();
    out.insert(Bits::new(size - 1, bits).expect("in range"));
    for i in 0..bits {
        out.insert(Bits::new(1 << i, bits).expect("in range"));
    }
    out.into_iter().collect()
}

/// Exact `Pr[Verify(PKGen(sk), m, Sign(sk, m)) = 1]` for `trials` sampled
/// keys and every message of a covering sample of `M_λ`.
pub fn correctness_audit(scheme: &dyn QdsScheme, family: &OracleFamily, trials: usize, seed: u64) -> Result<CorrectnessReport> {
    let lambda = scheme.lambda();
    if !(3..=8).contains(&lambda) {
        return Err(Error::invalid(format!("correctness audit runs at 3 ≤ λ ≤ 8, got {lambda}")));
    }
    if trials == 0 {
        return Err(Error::invalid("correctness audit needs at least one trial"));
    }
    let mut rng = seeds::rng(seeds::derive(seed, seeds::GAME));
    let keys: Vec<Bits> = (0..trials).map(|_| scheme.keygen(&mut rng)).collect();
    let mut per_message = Vec::new();
    for m in message_sample(scheme.message_bits()) {
        let mut worst = 1.0f64;
        for &sk in &keys {
            worst = worst.min(ver_pkgen_sign_probability(scheme, sk, m, sk, family)?);
        }
        per_message.push((m, worst));
    }
    let min_acceptance = per_message.iter().map(|(_, p)| *p).fold(1.0, f64::min);
    Ok(CorrectnessReport {
        scheme: scheme.id().to_string(),
        lambda,
        trials,
        per_message,
        min_acceptance,
        pass: min_acceptance >= CORRECTNESS_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::build_oracle_family;
    use crate::qds::SchemeRegistry;

    fn play(scheme: &str, adversary: &str, lambda: usize, games: u64) -> Vec<GameResult> {
        let scheme = SchemeRegistry::default().build(scheme, lambda).unwrap();
        let adv = AdversaryRegistry::default().build(adversary, &AdversaryParams::default()).unwrap();
        let family = build_oracle_family(scheme.oracle_levels(), 5).unwrap();
        (0..games).map(|s| unforgeability_game(scheme.as_ref(), adv.as_ref(), &family, s).unwrap()).collect()
    }

    #[test]
    fn replay_always_loses() {
        for r in play("lamport-prs", "replay", 3, 10) {
            assert!(!r.win);
            assert_eq!(r.reason.as_deref(), Some("queried message"));
        }
    }

    #[test]
    fn leaked_key_wins() {
        let results = play("toy-weak", "leaked-key", 4, 20);
        assert!(results.iter().all(|r| r.win && r.leaked));
    }

    #[test]
    fn random_signature_rarely_wins() {
        let wins = play("lamport-prs", "random-signature", 3, 50).iter().filter(|r| r.win).count();
        assert!(wins <= 2, "{wins}");
    }

    #[test]
    fn constant_schemes_audit() {
        let reg = SchemeRegistry::default();
        let family = build_oracle_family(1, 0).unwrap();
        let acc = correctness_audit(reg.build("always-accept", 4).unwrap().as_ref(), &family, 3, 0).unwrap();
        assert!(acc.pass && acc.per_message.iter().all(|(_, p)| *p == 1.0));
        let rej = correctness_audit(reg.build("always-reject", 4).unwrap().as_ref(), &family, 3, 0).unwrap();
        assert!(!rej.pass && rej.min_acceptance == 0.0);
        assert!(correctness_audit(reg.build("always-accept", 2).unwrap().as_ref(), &family, 3, 0).is_err());
    }

    #[test]
    fn message_sample_covers_large_spaces() {
        assert_eq!(message_sample(4).len(), 16);
        let big = message_sample(10);
        assert!(big.len() >= 256 && big.len() < 1024);
        assert!(big.contains(&Bits::new(1023, 10).unwrap()));
    }

    #[test]
    fn game_is_seed_deterministic() {
        assert_eq!(play("toy-weak", "random-signature", 3, 5), play("toy-weak", "random-signature", 3, 5));
    }
}
