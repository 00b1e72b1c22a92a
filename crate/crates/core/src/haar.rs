//! Haar sampling, the seeded oracle family, and concentration experiments.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    apply_unitary, run_circuit_exact, OracleBinding, OracleIndex, QuantumCircuit, StateVector, Unitary, C64,
};
use crate::seeds;
use crate::{Error, Result};

pub const MAX_LEVEL: usize = 12;

/// Default cap on the total number of complex entries held by a family.
pub const DEFAULT_ENTRY_BUDGET: usize = 1 << 22;

pub const DUMP_FORMAT_VERSION: u32 = 1;

/// Haar-distributed unitary: Ginibre matrix, QR, then each column of Q is
/// rotated by the phase of the matching diagonal entry of R.
pub fn sample_haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Unitary> {
    if dim == 0 {
        return Err(Error::invalid("Haar dimension must be at least 1"));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    if dim.is_power_of_two() {
        Ok(Unitary::new(q)?)
    } else {
        Err(Error::invalid(format!("dimension {dim} is not a power of two")))
    }
}

/// How a caller wants to apply an oracle entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Forward,
    Inverse,
}

/// The indexed family `{U_ℓ}`: level `ℓ` holds `2^ℓ` unitaries on `ℓ` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFamily {
    l_max: usize,
    seed: u64,
    levels: Vec<Vec<Unitary>>,
}

pub fn entry_count(l_max: usize) -> usize {
    (1..=l_max).map(|l| 1usize << (3 * l)).sum()
}

fn entry_seed(family_seed: u64, level: usize, key: u64) -> u64 {
    seeds::derive(seeds::derive(family_seed, seeds::ORACLE), ((level as u64) << 48) | key)
}

pub fn build_oracle_family(l_max: usize, seed: u64) -> Result<OracleFamily> {
    build_oracle_family_with_budget(l_max, seed, DEFAULT_ENTRY_BUDGET)
}

pub fn build_oracle_family_with_budget(l_max: usize, seed: u64, entry_budget: usize) -> Result<OracleFamily> {
    if l_max == 0 || l_max > MAX_LEVEL {
        return Err(Error::LevelOutOfRange { level: l_max, max: MAX_LEVEL });
    }
    let needed = entry_count(l_max);
    if needed > entry_budget {
        return Err(Error::EntryBudget { needed, budget: entry_budget });
    }
    let levels = (1..=l_max)
        .map(|level| {
            (0..1u64 << level)
                .into_par_iter()
                .map(|key| sample_haar_unitary(1 << level, &mut seeds::rng(entry_seed(seed, level, key))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleFamily { l_max, seed, levels })
}

impl OracleFamily {
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level_size(&self, level: usize) -> Result<usize> {
        self.check_level(level)?;
        Ok(self.levels[level - 1].len())
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.l_max {
            return Err(Error::LevelOutOfRange { level, max: self.l_max });
        }
        Ok(())
    }

    pub(crate) fn entry(&self, level: usize, key: u64) -> Result<&Unitary> {
        self.check_level(level)?;
        self.levels[level - 1]
            .get(key as usize)
            .ok_or(Error::KeyOutOfRange { level, key })
    }

    /// `|PRS(k)⟩ = U_k |0…0⟩`.
    pub fn prs_state(&self, level: usize, key: u64) -> Result<StateVector> {
        Ok(self.entry(level, key)?.column(0))
    }

    pub fn session(&self) -> OracleSession<'_> {
        OracleSession { family: self, queries: 0 }
    }

    /// Largest entrywise difference against another family at one level.
    pub fn max_entry_difference(&self, other: &OracleFamily, level: usize) -> Result<f64> {
        self.check_level(level)?;
        other.check_level(level)?;
        Ok(self.levels[level - 1]
            .iter()
            .zip(&other.levels[level - 1])
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }

    pub fn write_dump<W: Write>(&self, w: W) -> Result<()> {
        let dump = FamilyDump {
            format_version: DUMP_FORMAT_VERSION,
            l_max: self.l_max,
            seed: self.seed,
            levels: self
                .levels
                .iter()
                .map(|lv| lv.iter().map(|u| u.matrix().iter().map(|z| [z.re, z.im]).collect()).collect())
                .collect(),
        };
        serde_json::to_writer(w, &dump)?;
        Ok(())
    }

    pub fn read_dump<R: Read>(r: R) -> Result<OracleFamily> {
        let dump: FamilyDump = serde_json::from_reader(r)?;
        if dump.format_version != DUMP_FORMAT_VERSION {
            return Err(Error::ReportVersion { found: dump.format_version, expected: DUMP_FORMAT_VERSION });
        }
        if dump.levels.len() != dump.l_max {
            return Err(Error::invalid("dump level count disagrees with header"));
        }
        let mut levels = Vec::with_capacity(dump.l_max);
        for (i, lv) in dump.levels.into_iter().enumerate() {
            let dim = 1usize << (i + 1);
            if lv.len() != dim {
                return Err(Error::invalid(format!("dump level {} has {} entries", i + 1, lv.len())));
            }
            let mut us = Vec::with_capacity(dim);
            for entries in lv {
                if entries.len() != dim * dim {
                    return Err(Error::invalid("dump matrix has the wrong size"));
                }
                let mat = DMatrix::from_iterator(dim, dim, entries.into_iter().map(|[re, im]| C64::new(re, im)));
                us.push(Unitary::new(mat)?);
            }
            levels.push(us);
        }
        Ok(OracleFamily { l_max: dump.l_max, seed: dump.seed, levels })
    }
}

impl OracleBinding for OracleFamily {
    fn resolve(&self, level: usize, key: u64) -> Option<&Unitary> {
        self.entry(level, key).ok()
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyDump {
    format_version: u32,
    l_max: usize,
    seed: u64,
    levels: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Forward-only query access with a per-session counter.
#[derive(Debug)]
pub struct OracleSession<'a> {
    family: &'a OracleFamily,
    queries: u64,
}

impl<'a> OracleSession<'a> {
    pub fn family(&self) -> &'a OracleFamily {
        self.family
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn query(&mut self, level: usize, key: u64, psi: &StateVector, access: Access) -> Result<StateVector> {
        if access == Access::Inverse {
            return Err(Error::InverseAccess);
        }
        let u = self.family.entry(level, key)?;
        let out = apply_unitary(u, psi)?;
        self.queries += 1;
        Ok(out)
    }

    /// Controlled query: wire 0 of `psi` is the control, wires `1..=level` the target.
    pub fn query_controlled(
        &mut self,
        level: usize,
        key: u64,
        psi: &StateVector,
        access: Access,
    ) -> Result<StateVector> {
        if access == Access::Inverse {
            return Err(Error::InverseAccess);
        }
        let u = self.family.entry(level, key)?;
        let mut c = QuantumCircuit::new(level + 1, 0)?;
        let targets: Vec<usize> = (1..=level).collect();
        c.controlled(u.clone(), &[0], &targets)?;
        let out = crate::linalg::evolve(&c, psi, &crate::linalg::NoOracle)?;
        self.queries += 1;
        Ok(out)
    }

    /// Adds queries made through another session on the same family.
    pub(crate) fn charge(&mut self, count: u64) {
        self.queries += count;
    }

    /// Entry used to simulate `count` independent forward queries; the
    /// counter advances by `count`.
    pub(crate) fn simulate_queries(&mut self, level: usize, key: u64, count: u64) -> Result<&'a Unitary> {
        let u = self.family.entry(level, key)?;
        self.queries += count;
        Ok(u)
    }
}

/// Binding that answers every key of one level with the same unitary.
pub struct LevelBinding {
    pub level: usize,
    pub unitary: Unitary,
}

impl OracleBinding for LevelBinding {
    fn resolve(&self, level: usize, _key: u64) -> Option<&Unitary> {
        (level == self.level).then_some(&self.unitary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub circuit_id: String,
    pub queries: usize,
    pub dim: usize,
    pub samples: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub max_pairwise_deviation: f64,
}

impl ConcentrationReport {
    pub fn from_values(circuit_id: &str, queries: usize, dim: usize, values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = if values.is_empty() { 0.0 } else { max - min };
        ConcentrationReport {
            circuit_id: circuit_id.to_string(),
            queries,
            dim,
            samples: values.len(),
            values,
            mean,
            std,
            max_pairwise_deviation: spread,
        }
    }
}

/// Sample mean and (n−1)-normalised standard deviation. Deviations are taken
/// from the first value, so a constant list has std exactly 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let shift = values[0];
    let n = values.len() as f64;
    let s1: f64 = values.iter().map(|v| v - shift).sum();
    let mean = shift + s1 / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let s2: f64 = values.iter().map(|v| (v - shift).powi(2)).sum();
    let var = ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0);
    (mean, var.sqrt())
}

/// One query to `U_{0,n}` on `|0…0⟩`, reading wire 0.
pub fn single_query_test_circuit(n: usize) -> Result<QuantumCircuit> {
    let mut c = QuantumCircuit::new(n, 0)?;
    let wires: Vec<usize> = (0..n).collect();
    c.oracle(n, OracleIndex::Fixed(0), &wires)?;
    c.measure(&[0])?;
    Ok(c)
}

/// Evaluates `Pr[C^U = 1]` on `|0…0⟩` for `samples` fresh Haar unitaries of
/// dimension `2^n`, every placeholder bound to the same draw.
pub fn concentration_experiment<R: Rng + ?Sized>(
    c: &QuantumCircuit,
    circuit_id: &str,
    n: usize,
    samples: usize,
    rng: &mut R,
) -> Result<ConcentrationReport> {
    if samples < 2 {
        return Err(Error::invalid("concentration needs at least 2 samples"));
    }
    let levels = c.oracle_levels();
    if levels.len() > 1 {
        return Err(Error::invalid("circuit queries more than one oracle level"));
    }
    if let Some(&l) = levels.iter().next() {
        if l != n {
            return Err(Error::invalid(format!("circuit queries level {l}, experiment is at n = {n}")));
        }
    }
    let input = StateVector::zero(c.num_qubits())?;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let unitary = sample_haar_unitary(1 << n, rng)?;
        let binding = LevelBinding { level: n, unitary };
        values.push(run_circuit_exact(c, &input, &binding)?);
    }
    Ok(ConcentrationReport::from_values(circuit_id, c.query_count(), 1 << n, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LinalgError;

    #[test]
    fn dim_one_is_a_phase() {
        let mut rng = seeds::rng(1);
        let u = sample_haar_unitary(1, &mut rng).unwrap();
        assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(sample_haar_unitary(0, &mut rng).is_err());
    }

    #[test]
    fn haar_outputs_are_unitary() {
        let mut rng = seeds::rng(2);
        for dim in [2, 4, 8, 16, 32] {
            assert!(sample_haar_unitary(dim, &mut rng).unwrap().deviation_from_unitary() < 1e-8);
        }
    }

    #[test]
    fn haar_first_entry_mean() {
        // E|⟨0|U|0⟩|² = 1/dim; the sd of the estimate is below 0.001 here.
        let mut rng = seeds::rng(3);
        let n = 10_000;
        let mean: f64 =
            (0..n).map(|_| sample_haar_unitary(8, &mut rng).unwrap().matrix()[(0, 0)].norm_sqr()).sum::<f64>()
                / n as f64;
        assert!((mean - 0.125).abs() < 0.01, "{mean}");
    }

    #[test]
    fn haar_left_invariance_ks() {
        let mut rng = seeds::rng(4);
        let v = sample_haar_unitary(4, &mut rng).unwrap();
        let n = 10_000;
        let mut a: Vec<f64> = Vec::with_capacity(n);
        let mut b: Vec<f64> = Vec::with_capacity(n);
        for _ in 0..n {
            a.push(sample_haar_unitary(4, &mut rng).unwrap().matrix()[(0, 0)].norm_sqr());
            let u = sample_haar_unitary(4, &mut rng).unwrap();
            b.push(v.mul(&u).unwrap().matrix()[(0, 0)].norm_sqr());
        }
        assert!(ks_statistic(&mut a, &mut b) < 0.05);
    }

    pub(crate) fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn family_shape_and_determinism() {
        let f = build_oracle_family(2, 7).unwrap();
        assert_eq!(f.level_size(1).unwrap(), 2);
        assert_eq!(f.level_size(2).unwrap(), 4);
        assert_eq!(f.entry(2, 3).unwrap().dim(), 4);
        let g = build_oracle_family(2, 7).unwrap();
        assert_eq!(f, g);
        let h = build_oracle_family(2, 8).unwrap();
        assert!(f.max_entry_difference(&h, 2).unwrap() > 0.1);
        assert!(build_oracle_family(0, 1).is_err());
        assert!(build_oracle_family(13, 1).is_err());
        assert!(matches!(build_oracle_family_with_budget(4, 1, 100), Err(Error::EntryBudget { .. })));
    }

    #[test]
    fn session_counts_and_rejects_inverse() {
        let f = build_oracle_family(2, 11).unwrap();
        let mut s = f.session();
        let psi = StateVector::zero(2).unwrap();
        let a = s.query(2, 1, &psi, Access::Forward).unwrap();
        let b = s.query(2, 1, &psi, Access::Forward).unwrap();
        assert_eq!(a, b);
        for _ in 0..3 {
            s.query(2, 0, &psi, Access::Forward).unwrap();
        }
        assert_eq!(s.queries(), 5);
        assert!(matches!(s.query(2, 1, &psi, Access::Inverse), Err(Error::InverseAccess)));
        assert!(matches!(s.query_controlled(2, 1, &StateVector::zero(3).unwrap(), Access::Inverse), Err(Error::InverseAccess)));
        assert_eq!(s.queries(), 5);
        // Offline check with the stored matrix.
        let back = apply_unitary(&f.entry(2, 1).unwrap().adjoint(), &a).unwrap();
        assert!(back.max_abs_diff(&psi) < 1e-8);
        assert!(matches!(
            s.query(2, 1, &StateVector::zero(1).unwrap(), Access::Forward),
            Err(Error::Linalg(LinalgError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn controlled_query_respects_control() {
        let f = build_oracle_family(1, 5).unwrap();
        let mut s = f.session();
        let off = StateVector::zero(2).unwrap();
        assert_eq!(s.query_controlled(1, 0, &off, Access::Forward).unwrap(), off);
        let on = StateVector::basis(4, 1).unwrap();
        let out = s.query_controlled(1, 0, &on, Access::Forward).unwrap();
        let u = f.entry(1, 0).unwrap();
        assert!((out.amplitudes()[1] - u.matrix()[(0, 0)]).norm() < 1e-12);
        assert!((out.amplitudes()[3] - u.matrix()[(1, 0)]).norm() < 1e-12);
    }

    #[test]
    fn prs_states() {
        let f = build_oracle_family(4, 99).unwrap();
        let a = f.prs_state(4, 3).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a, f.prs_state(4, 3).unwrap());
        assert!(f.prs_state(5, 0).is_err());
        // Mean overlap of distinct Haar states in dim 16 is 1/17; 1/16 ± 0.05 covers it.
        let states: Vec<_> = (0..16).map(|k| f.prs_state(4, k).unwrap()).collect();
        let mut total = 0.0;
        let mut pairs = 0;
        for i in 0..16 {
            for j in 0..16 {
                if i != j {
                    total += states[i].overlap(&states[j]).unwrap();
                    pairs += 1;
                }
            }
        }
        assert!((total / pairs as f64 - 1.0 / 16.0).abs() < 0.05);
    }

    #[test]
    fn dump_round_trip() {
        let f = build_oracle_family(3, 21).unwrap();
        let mut buf = Vec::new();
        f.write_dump(&mut buf).unwrap();
        let g = OracleFamily::read_dump(buf.as_slice()).unwrap();
        assert_eq!(f, g);
        let bumped = String::from_utf8(buf).unwrap().replacen("\"format_version\":1", "\"format_version\":9", 1);
        assert!(matches!(OracleFamily::read_dump(bumped.as_bytes()), Err(Error::ReportVersion { .. })));
    }

    #[test]
    fn query_free_circuit_has_zero_spread() {
        let mut c = QuantumCircuit::new(2, 0).unwrap();
        c.h(0).unwrap().measure(&[0]).unwrap();
        let r = concentration_experiment(&c, "h", 2, 20, &mut seeds::rng(8)).unwrap();
        assert_eq!(r.std, 0.0);
        assert!(r.max_pairwise_deviation <= 2.0);
    }

    #[test]
    fn concentration_tightens_with_dimension() {
        let mut rng = seeds::rng(10);
        let small = concentration_experiment(&single_query_test_circuit(2).unwrap(), "q1", 2, 200, &mut rng).unwrap();
        let large = concentration_experiment(&single_query_test_circuit(6).unwrap(), "q1", 6, 200, &mut rng).unwrap();
        assert!(large.std < small.std);
        assert!(small.values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn concentration_rejects_mixed_levels() {
        let mut c = QuantumCircuit::new(2, 0).unwrap();
        c.oracle(1, OracleIndex::Fixed(0), &[0]).unwrap();
        c.oracle(2, OracleIndex::Fixed(0), &[0, 1]).unwrap();
        assert!(concentration_experiment(&c, "mixed", 2, 4, &mut seeds::rng(1)).is_err());
    }
}
