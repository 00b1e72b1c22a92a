//! Quantum digital signatures with classical keys and signatures, the
//! multi-time unforgeability game, and reference schemes.

mod bits;
pub mod game;
pub mod schemes;

pub use bits::Bits;
pub use game::{
    correctness_audit, unforgeability_game, Adversary, AdversaryOutput, AdversaryParams, AdversaryRegistry,
    CorrectnessReport, Forgery, GameContext, GameResult,
};
pub use schemes::{message_bits_for, SchemeRegistry};

use rand::Rng;

use crate::linalg::{run_circuit_exact, OracleBinding, QuantumCircuit, StateVector};
use crate::Result;

/// One verifier test: the public-key block `block` sits on the low wires of
/// `circuit`, all other wires start in `|0⟩`; the test runs `reps` times on
/// fresh copies and must pass every time.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCheck {
    pub block: usize,
    pub circuit: QuantumCircuit,
    pub reps: u32,
}

/// Verification as a conjunction of independent checks on disjoint
/// registers, so the acceptance probability is `Π p_i^{reps_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyProgram {
    pub checks: Vec<VerifyCheck>,
    /// Set when the verifier rejects on classical grounds alone.
    pub reject: bool,
}

impl VerifyProgram {
    pub fn accept_all() -> Self {
        VerifyProgram { checks: Vec::new(), reject: false }
    }

    pub fn reject() -> Self {
        VerifyProgram { checks: Vec::new(), reject: true }
    }

    pub fn query_count(&self) -> usize {
        self.checks.iter().map(|c| c.reps as usize * c.circuit.query_count()).sum()
    }
}

/// The four algorithms `(SKGen, PKGen, Sign, Verify)` with oracle access.
///
/// `PKGen(sk)` is the tensor product over blocks of `pk_copies()` copies of
/// the state prepared by `pk_block(sk, b)` from `|0…0⟩`.
pub trait QdsScheme: Send + Sync {
    fn id(&self) -> &str;
    fn lambda(&self) -> usize;
    fn key_bits(&self) -> usize;
    fn message_bits(&self) -> usize;
    fn signature_bits(&self) -> usize;
    /// Highest oracle level any algorithm queries.
    fn oracle_levels(&self) -> usize;
    fn pk_blocks(&self) -> usize;
    fn pk_copies(&self) -> usize;
    fn pk_block(&self, sk: Bits, block: usize) -> Result<QuantumCircuit>;
    /// Output distribution of `Sign(sk, m)`.
    fn sign_distribution(&self, sk: Bits, m: Bits, oracle: &dyn OracleBinding) -> Result<Vec<(Bits, f64)>>;
    fn verify_program(&self, m: Bits, sig: Bits) -> Result<VerifyProgram>;
    /// Qubits used by `Verify(PKGen(sk), m, σ)` as a single circuit.
    fn space(&self) -> usize;
    /// Oracle queries made by `Verify(PKGen(sk), m, σ)` as a single circuit.
    fn verpkgen_queries(&self) -> usize;

    fn keygen(&self, rng: &mut dyn rand::RngCore) -> Bits {
        Bits::random(self.key_bits(), rng)
    }

    fn sign(&self, sk: Bits, m: Bits, oracle: &dyn OracleBinding, rng: &mut dyn rand::RngCore) -> Result<Bits> {
        let dist = self.sign_distribution(sk, m, oracle)?;
        let mut r: f64 = rng.random();
        for (sig, p) in &dist {
            if r < *p {
                return Ok(*sig);
            }
            r -= p;
        }
        Ok(dist.last().expect("sign distribution is nonempty").0)
    }
}

/// Circuit for one check with its public-key block prepared in place.
pub fn composed_check(scheme: &dyn QdsScheme, sk: Bits, check: &VerifyCheck) -> Result<QuantumCircuit> {
    let block = scheme.pk_block(sk, check.block)?;
    let mut c = block.widened(check.circuit.num_qubits(), check.circuit.output())?;
    c.extend(&check.circuit)?;
    Ok(c)
}

pub fn check_probability(c: &QuantumCircuit, oracle: &dyn OracleBinding) -> Result<f64> {
    Ok(run_circuit_exact(c, &StateVector::zero(c.num_qubits())?, oracle)?)
}

/// Exact `Pr[Verify(PKGen(sk), m, σ) = 1]`.
pub fn ver_pkgen_probability(
    scheme: &dyn QdsScheme,
    sk: Bits,
    m: Bits,
    sig: Bits,
    oracle: &dyn OracleBinding,
) -> Result<f64> {
    let program = scheme.verify_program(m, sig)?;
    if program.reject {
        return Ok(0.0);
    }
    let mut p = 1.0;
    for check in &program.checks {
        let c = composed_check(scheme, sk, check)?;
        p *= check_probability(&c, oracle)?.powi(check.reps as i32);
    }
    Ok(p)
}

/// Exact `Pr[Verify(PKGen(sk), m, Sign(sk_signer, m)) = 1]`.
pub fn ver_pkgen_sign_probability(
    scheme: &dyn QdsScheme,
    sk: Bits,
    m: Bits,
    sk_signer: Bits,
    oracle: &dyn OracleBinding,
) -> Result<f64> {
    let mut p = 0.0;
    for (sig, w) in scheme.sign_distribution(sk_signer, m, oracle)? {
        p += w * ver_pkgen_probability(scheme, sk, m, sig, oracle)?;
    }
    Ok(p)
}

/// State vectors of every public-key block for `sk`.
pub fn pk_block_states(scheme: &dyn QdsScheme, sk: Bits, oracle: &dyn OracleBinding) -> Result<Vec<StateVector>> {
    (0..scheme.pk_blocks())
        .map(|b| {
            let c = scheme.pk_block(sk, b)?;
            Ok(crate::linalg::evolve(&c, &StateVector::zero(c.num_qubits())?, oracle)?)
        })
        .collect()
}
