//! Approximate unitary t-designs from random brickwork circuits, plus their
//! keyed derandomisation through polynomial hash families.

mod gf2;

pub use gf2::{is_irreducible, Gf2Field, PolynomialHash};

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::haar::sample_haar_unitary;
use crate::linalg::{circuit_unitary, NoOracle, OracleIndex, QuantumCircuit, Unitary, C64};
use crate::seeds;
use crate::{Error, Result};

pub const MAX_DESIGN_QUBITS: usize = 8;
pub const MAX_DESIGN_ORDER: usize = 4;

/// Bits of randomness consumed per sample: a ChaCha seed.
pub const RANDOMNESS_BITS: u32 = 64;

/// Sampler for an approximate phase-invariant unitary `t`-design on `n` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSampler {
    pub n: usize,
    pub t: usize,
    pub eps: f64,
    /// Brickwork layers of Haar-random two-qubit gates (single-qubit gates if `n = 1`).
    pub depth: usize,
    pub randomness_bits: u32,
}

pub fn make_design_sampler(n: usize, t: usize, eps: f64) -> Result<DesignSampler> {
    if !(1..=MAX_DESIGN_QUBITS).contains(&n) {
        return Err(Error::invalid(format!("design width n = {n} outside 1..={MAX_DESIGN_QUBITS}")));
    }
    if !(1..=MAX_DESIGN_ORDER).contains(&t) {
        return Err(Error::invalid(format!("design order t = {t} outside 1..={MAX_DESIGN_ORDER}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("design epsilon {eps} outside (0, 1)")));
    }
    let depth = 2 * n * t + (1.0 / eps).log2().ceil() as usize;
    Ok(DesignSampler { n, t, eps, depth, randomness_bits: RANDOMNESS_BITS })
}

impl DesignSampler {
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    fn brickwork(&self, rng: &mut impl Rng) -> Result<QuantumCircuit> {
        let mut c = QuantumCircuit::new(self.n, 0)?;
        for layer in 0..self.depth {
            if self.n == 1 {
                c.apply(sample_haar_unitary(2, rng)?, &[0])?;
                continue;
            }
            let mut i = layer % 2;
            while i + 1 < self.n {
                c.apply(sample_haar_unitary(4, rng)?, &[i, i + 1])?;
                i += 2;
            }
        }
        Ok(c)
    }

    /// Deterministic in `randomness`; includes the `(t+1)`-th root-of-unity phase.
    pub fn sample(&self, randomness: u64) -> Result<Unitary> {
        let mut rng = seeds::rng(randomness);
        let circuit = self.brickwork(&mut rng)?;
        let u = circuit_unitary(&circuit, &NoOracle)?;
        Ok(phase_randomize(&u, self.t, rng.next_u64()))
    }
}

/// `ω^j U` with `ω = e^{2πi/(t+1)}` and `j = bits mod (t+1)`.
pub fn phase_randomize(u: &Unitary, t: usize, bits: u64) -> Unitary {
    let order = t as u64 + 1;
    let j = bits % order;
    let theta = std::f64::consts::TAU * j as f64 / order as f64;
    if j == 0 {
        return u.clone();
    }
    u.scaled_by_phase(C64::from_polar(1.0, theta))
}

/// Mean of `|Tr(U†V)|^{2t}` over ordered pairs of distinct sample indices.
pub fn frame_potential(samples: &[Unitary], t: usize) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("frame potential needs at least two samples"));
    }
    let dim = samples[0].dim();
    if samples.iter().any(|u| u.dim() != dim) {
        return Err(Error::invalid("samples differ in dimension"));
    }
    let cols = DMatrix::from_fn(dim * dim, samples.len(), |r, c| samples[c].matrix().as_slice()[r]);
    let gram = cols.adjoint() * &cols;
    let n = samples.len();
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                total += gram[(i, j)].norm_sqr().powi(t as i32);
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Haar value of the frame potential, `t!`, valid when `dim ≥ t`.
pub fn haar_frame_potential(t: usize) -> f64 {
    (1..=t).map(|k| k as f64).product()
}

/// `Ũ_k = A(f(k))` for a `2T`-wise independent `f: {0,1}^ℓ → {0,1}^m`.
#[derive(Debug, Clone)]
pub struct KeyedDesignFamily {
    level: usize,
    queries: usize,
    sampler: DesignSampler,
    hash: PolynomialHash,
}

/// Draws the hash coefficients for level `level` from `seed`. The field is
/// GF(2^max(ℓ, m)) with the sampler's randomness width `m`.
pub fn keyed_family(level: usize, queries: usize, sampler: DesignSampler, seed: u64) -> Result<KeyedDesignFamily> {
    if level == 0 || queries == 0 {
        return Err(Error::invalid("keyed family needs level ≥ 1 and T ≥ 1"));
    }
    if sampler.n != level {
        return Err(Error::invalid(format!("sampler acts on {} qubits, level is {level}", sampler.n)));
    }
    let width = (level as u32).max(sampler.randomness_bits);
    let field = Gf2Field::new(width)?;
    let mut rng = seeds::rng(seeds::derive(seed, seeds::DESIGN));
    let coeffs = (0..2 * queries).map(|_| rng.next_u64()).collect();
    let hash = PolynomialHash::new(field, coeffs, sampler.randomness_bits)?;
    Ok(KeyedDesignFamily { level, queries, sampler, hash })
}

impl KeyedDesignFamily {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn num_keys(&self) -> u64 {
        1 << self.level
    }

    pub fn sampler(&self) -> &DesignSampler {
        &self.sampler
    }

    pub fn randomness(&self, key: u64) -> u64 {
        self.hash.eval(key)
    }

    pub fn unitary(&self, key: u64) -> Result<Unitary> {
        if key >= self.num_keys() {
            return Err(Error::KeyOutOfRange { level: self.level, key });
        }
        self.sampler.sample(self.randomness(key))
    }
}

/// Two-query test circuit on `n + 1` wires: ancilla 0 controls both queries
/// to `U_{0,n}` between Hadamards, and is read out.
pub fn sandwich_distinguisher(n: usize) -> Result<QuantumCircuit> {
    let mut c = QuantumCircuit::new(n + 1, 0)?;
    let targets: Vec<usize> = (1..=n).collect();
    c.h(0)?;
    c.controlled_oracle(0, n, OracleIndex::Fixed(0), &targets)?;
    c.h(0)?;
    c.controlled_oracle(0, n, OracleIndex::Fixed(0), &targets)?;
    c.h(0)?;
    c.measure(&[0])?;
    Ok(c)
}
