//! Reference schemes and the scheme registry.

use std::collections::BTreeMap;

use super::{Bits, QdsScheme, VerifyCheck, VerifyProgram};
use crate::linalg::{OracleBinding, OracleIndex, QuantumCircuit};
use crate::seeds::splitmix64;
use crate::{Error, Result};

/// Swap-test repetitions per public-key block, `⌈8·ln(100)⌉`.
pub const SWAP_TEST_REPS: u32 = 37;

/// Largest message length any scheme accepts (`|M| ≤ 2^10`).
pub const MAX_MESSAGE_BITS: usize = 10;

/// `ℓ_msg(λ) = ⌈2·log₂ λ⌉`.
pub fn message_bits_for(lambda: usize) -> usize {
    (2.0 * (lambda as f64).log2()).ceil() as usize
}

fn ceil_log2(x: usize) -> usize {
    (usize::BITS - (x.max(1) - 1).leading_zeros()) as usize
}

fn check_lambda(lambda: usize) -> Result<usize> {
    if lambda < 2 {
        return Err(Error::invalid(format!("security parameter λ = {lambda} must be at least 2")));
    }
    let bits = message_bits_for(lambda);
    if bits > MAX_MESSAGE_BITS {
        return Err(Error::CapViolation(format!("λ = {lambda} gives {bits} message bits, cap is {MAX_MESSAGE_BITS}")));
    }
    Ok(bits)
}

/// Swap test between the block on wires `0..level` and a fresh copy of
/// `PRS(key)` on `level..2·level`; ancilla `2·level` reads 1 on acceptance.
pub fn swap_test_check(level: usize, key: u64) -> Result<QuantumCircuit> {
    let anc = 2 * level;
    let block: Vec<usize> = (0..level).collect();
    let fresh: Vec<usize> = (level..2 * level).collect();
    let mut c = QuantumCircuit::new(2 * level + 1, anc)?;
    c.oracle(level, OracleIndex::Fixed(key), &fresh)?;
    c.h(anc)?;
    c.cswap(anc, &block, &fresh)?;
    c.h(anc)?;
    c.x(anc)?;
    c.measure(&[anc])?;
    Ok(c)
}

fn prs_block(level: usize, key: u64) -> Result<QuantumCircuit> {
    let wires: Vec<usize> = (0..level).collect();
    let mut c = QuantumCircuit::new(level, 0)?;
    c.oracle(level, OracleIndex::Fixed(key), &wires)?;
    Ok(c)
}

fn expect_width(what: &str, b: Bits, width: usize) -> Result<()> {
    if b.width() != width {
        return Err(Error::invalid(format!("{what} has {} bits, scheme expects {width}", b.width())));
    }
    Ok(())
}

/// Lamport-style scheme over PRS states: two key halves per message bit,
/// each half a single secret bit selecting one of two oracle indices.
#[derive(Debug, Clone)]
pub struct LamportPrs {
    lambda: usize,
    msg_bits: usize,
    level: usize,
}

impl LamportPrs {
    pub fn new(lambda: usize) -> Result<Self> {
        let msg_bits = check_lambda(lambda)?;
        let level = ceil_log2(msg_bits) + 2;
        Ok(LamportPrs { lambda, msg_bits, level })
    }

    /// Oracle index of half `b` of position `i` when its secret bit is `s`.
    pub fn index(i: usize, b: bool, s: bool) -> u64 {
        (4 * i + 2 * b as usize + s as usize) as u64
    }
}

impl QdsScheme for LamportPrs {
    fn id(&self) -> &str {
        "lamport-prs"
    }

    fn lambda(&self) -> usize {
        self.lambda
    }

    fn key_bits(&self) -> usize {
        2 * self.msg_bits
    }

    fn message_bits(&self) -> usize {
        self.msg_bits
    }

    fn signature_bits(&self) -> usize {
        self.msg_bits * self.level
    }

    fn oracle_levels(&self) -> usize {
        self.level
    }

    fn pk_blocks(&self) -> usize {
        2 * self.msg_bits
    }

    fn pk_copies(&self) -> usize {
        SWAP_TEST_REPS as usize
    }

    fn pk_block(&self, sk: Bits, block: usize) -> Result<QuantumCircuit> {
        expect_width("secret key", sk, self.key_bits())?;
        if block >= self.pk_blocks() {
            return Err(Error::invalid(format!("block {block} out of range")));
        }
        prs_block(self.level, Self::index(block / 2, block % 2 == 1, sk.bit(block)))
    }

    fn sign_distribution(&self, sk: Bits, m: Bits, _oracle: &dyn OracleBinding) -> Result<Vec<(Bits, f64)>> {
        expect_width("secret key", sk, self.key_bits())?;
        expect_width("message", m, self.msg_bits)?;
        let mut value = 0u64;
        for i in 0..self.msg_bits {
            let b = m.bit(i);
            let idx = Self::index(i, b, sk.bit(2 * i + b as usize));
            value |= idx << (i * self.level);
        }
        Ok(vec![(Bits::new(value, self.signature_bits())?, 1.0)])
    }

    fn verify_program(&self, m: Bits, sig: Bits) -> Result<VerifyProgram> {
        expect_width("message", m, self.msg_bits)?;
        expect_width("signature", sig, self.signature_bits())?;
        let field = (1u64 << self.level) - 1;
        let mut checks = Vec::with_capacity(self.msg_bits);
        for i in 0..self.msg_bits {
            let b = m.bit(i);
            let revealed = (sig.value() >> (i * self.level)) & field;
            if revealed >> 1 != Self::index(i, b, false) >> 1 {
                return Ok(VerifyProgram::reject());
            }
            checks.push(VerifyCheck {
                block: 2 * i + b as usize,
                circuit: swap_test_check(self.level, revealed)?,
                reps: SWAP_TEST_REPS,
            });
        }
        Ok(VerifyProgram { checks, reject: false })
    }

    fn space(&self) -> usize {
        self.msg_bits * (2 * self.level + 1)
    }

    fn verpkgen_queries(&self) -> usize {
        self.msg_bits * SWAP_TEST_REPS as usize * 2
    }
}

/// Deliberately multi-time insecure scheme: `σ = sk ⊕ spread(m)` and
/// verification of message `m` only inspects key bit `m mod λ`.
#[derive(Debug, Clone)]
pub struct ToyWeak {
    lambda: usize,
    msg_bits: usize,
    level: usize,
}

impl ToyWeak {
    pub fn new(lambda: usize) -> Result<Self> {
        let msg_bits = check_lambda(lambda)?;
        let level = ceil_log2(lambda) + 1;
        Ok(ToyWeak { lambda, msg_bits, level })
    }

    fn spread(&self, m: Bits) -> u64 {
        let mask = if self.lambda >= 64 { u64::MAX } else { (1u64 << self.lambda) - 1 };
        splitmix64(m.value()) & mask
    }
}

impl QdsScheme for ToyWeak {
    fn id(&self) -> &str {
        "toy-weak"
    }

    fn lambda(&self) -> usize {
        self.lambda
    }

    fn key_bits(&self) -> usize {
        self.lambda
    }

    fn message_bits(&self) -> usize {
        self.msg_bits
    }

    fn signature_bits(&self) -> usize {
        self.lambda
    }

    fn oracle_levels(&self) -> usize {
        self.level
    }

    fn pk_blocks(&self) -> usize {
        self.lambda
    }

    fn pk_copies(&self) -> usize {
        SWAP_TEST_REPS as usize
    }

    fn pk_block(&self, sk: Bits, block: usize) -> Result<QuantumCircuit> {
        expect_width("secret key", sk, self.key_bits())?;
        if block >= self.pk_blocks() {
            return Err(Error::invalid(format!("block {block} out of range")));
        }
        prs_block(self.level, (2 * block) as u64 + sk.bit(block) as u64)
    }

    fn sign_distribution(&self, sk: Bits, m: Bits, _oracle: &dyn OracleBinding) -> Result<Vec<(Bits, f64)>> {
        expect_width("secret key", sk, self.key_bits())?;
        expect_width("message", m, self.msg_bits)?;
        Ok(vec![(Bits::new(sk.value() ^ self.spread(m), self.lambda)?, 1.0)])
    }

    fn verify_program(&self, m: Bits, sig: Bits) -> Result<VerifyProgram> {
        expect_width("message", m, self.msg_bits)?;
        expect_width("signature", sig, self.signature_bits())?;
        let p = (m.value() % self.lambda as u64) as usize;
        let bit = ((sig.value() ^ self.spread(m)) >> p) & 1;
        Ok(VerifyProgram {
            checks: vec![VerifyCheck {
                block: p,
                circuit: swap_test_check(self.level, 2 * p as u64 + bit)?,
                reps: SWAP_TEST_REPS,
            }],
            reject: false,
        })
    }

    fn space(&self) -> usize {
        2 * self.level + 1
    }

    fn verpkgen_queries(&self) -> usize {
        SWAP_TEST_REPS as usize * 2
    }
}

/// Scheme whose verifier ignores its input and returns a fixed verdict.
#[derive(Debug, Clone)]
pub struct Constant {
    lambda: usize,
    msg_bits: usize,
    accept: bool,
}

impl Constant {
    pub fn new(lambda: usize, accept: bool) -> Result<Self> {
        Ok(Constant { lambda, msg_bits: check_lambda(lambda)?, accept })
    }
}

impl QdsScheme for Constant {
    fn id(&self) -> &str {
        if self.accept {
            "always-accept"
        } else {
            "always-reject"
        }
    }

    fn lambda(&self) -> usize {
        self.lambda
    }

    fn key_bits(&self) -> usize {
        self.lambda
    }

    fn message_bits(&self) -> usize {
        self.msg_bits
    }

    fn signature_bits(&self) -> usize {
        1
    }

    fn oracle_levels(&self) -> usize {
        1
    }

    fn pk_blocks(&self) -> usize {
        0
    }

    fn pk_copies(&self) -> usize {
        0
    }

    fn pk_block(&self, _sk: Bits, block: usize) -> Result<QuantumCircuit> {
        Err(Error::invalid(format!("block {block} out of range")))
    }

    fn sign_distribution(&self, _sk: Bits, _m: Bits, _oracle: &dyn OracleBinding) -> Result<Vec<(Bits, f64)>> {
        Ok(vec![(Bits::new(0, 1)?, 1.0)])
    }

    fn verify_program(&self, _m: Bits, _sig: Bits) -> Result<VerifyProgram> {
        Ok(if self.accept { VerifyProgram::accept_all() } else { VerifyProgram::reject() })
    }

    fn space(&self) -> usize {
        0
    }

    fn verpkgen_queries(&self) -> usize {
        0
    }
}

pub type SchemeFactory = fn(usize) -> Result<Box<dyn QdsScheme>>;

/// Name → constructor table for schemes, selected at runtime.
#[derive(Clone)]
pub struct SchemeRegistry {
    entries: BTreeMap<String, SchemeFactory>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = SchemeRegistry { entries: BTreeMap::new() };
        r.register("lamport-prs", |l| Ok(Box::new(LamportPrs::new(l)?)));
        r.register("toy-weak", |l| Ok(Box::new(ToyWeak::new(l)?)));
        r.register("always-accept", |l| Ok(Box::new(Constant::new(l, true)?)));
        r.register("always-reject", |l| Ok(Box::new(Constant::new(l, false)?)));
        r
    }
}

impl SchemeRegistry {
    pub fn register(&mut self, name: &str, factory: SchemeFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn build(&self, name: &str, lambda: usize) -> Result<Box<dyn QdsScheme>> {
        let f = self.entries.get(name).ok_or_else(|| Error::UnknownName {
            kind: "scheme",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        f(lambda)
    }
}
