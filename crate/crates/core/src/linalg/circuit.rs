use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{log2_exact, LinalgError, Result, StateVector, Unitary, C64, MAX_QUBITS};

/// Resolves oracle placeholders to concrete unitaries.
pub trait OracleBinding {
    fn resolve(&self, level: usize, key: u64) -> Option<&Unitary>;
}

impl<T: OracleBinding + ?Sized> OracleBinding for &T {
    fn resolve(&self, level: usize, key: u64) -> Option<&Unitary> {
        (**self).resolve(level, key)
    }
}

/// Binding that resolves nothing; valid only for oracle-free circuits.
pub struct NoOracle;

impl OracleBinding for NoOracle {
    fn resolve(&self, _level: usize, _key: u64) -> Option<&Unitary> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OracleIndex {
    /// Index register held on wires, little-endian; may be in superposition.
    Wires(Vec<usize>),
    /// Classical index fixed when the circuit was built.
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCall {
    pub level: usize,
    pub index: OracleIndex,
    pub targets: Vec<usize>,
    pub control: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Unitary { matrix: Unitary, wires: Vec<usize>, controls: Vec<usize> },
    /// `Σ_k |k⟩⟨k| ⊗ blocks[k]` with `k` read from `index` wires.
    Multiplexed { index: Vec<usize>, targets: Vec<usize>, controls: Vec<usize>, blocks: Vec<Unitary> },
    Oracle(OracleCall),
    Measure { wires: Vec<usize> },
}

/// Circuit over `num_qubits` wires whose result is the final standard-basis
/// value of `output`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    num_qubits: usize,
    output: usize,
    gates: Vec<Gate>,
}

impl QuantumCircuit {
    pub fn new(num_qubits: usize, output: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(LinalgError::DimensionCap(1usize << num_qubits.min(63)));
        }
        if output >= num_qubits {
            return Err(LinalgError::MalformedCircuit(format!("output wire {output} out of range")));
        }
        Ok(Self { num_qubits, output, gates: Vec::new() })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        self.validate_gate(&gate)?;
        self.gates.push(gate);
        Ok(self)
    }

    pub fn apply(&mut self, matrix: Unitary, wires: &[usize]) -> Result<&mut Self> {
        self.push(Gate::Unitary { matrix, wires: wires.to_vec(), controls: vec![] })
    }

    pub fn controlled(&mut self, matrix: Unitary, controls: &[usize], wires: &[usize]) -> Result<&mut Self> {
        self.push(Gate::Unitary { matrix, wires: wires.to_vec(), controls: controls.to_vec() })
    }

    pub fn h(&mut self, w: usize) -> Result<&mut Self> {
        self.apply(super::gates::h(), &[w])
    }

    pub fn x(&mut self, w: usize) -> Result<&mut Self> {
        self.apply(super::gates::x(), &[w])
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.controlled(super::gates::x(), &[control], &[target])
    }

    /// Controlled swap of two equal-width registers.
    pub fn cswap(&mut self, control: usize, a: &[usize], b: &[usize]) -> Result<&mut Self> {
        if a.len() != b.len() {
            return Err(LinalgError::MalformedCircuit("cswap registers differ in width".into()));
        }
        for (&wa, &wb) in a.iter().zip(b) {
            self.controlled(super::gates::swap(), &[control], &[wa, wb])?;
        }
        Ok(self)
    }

    pub fn oracle(&mut self, level: usize, index: OracleIndex, targets: &[usize]) -> Result<&mut Self> {
        self.push(Gate::Oracle(OracleCall { level, index, targets: targets.to_vec(), control: None }))
    }

    pub fn controlled_oracle(
        &mut self,
        control: usize,
        level: usize,
        index: OracleIndex,
        targets: &[usize],
    ) -> Result<&mut Self> {
        self.push(Gate::Oracle(OracleCall { level, index, targets: targets.to_vec(), control: Some(control) }))
    }

    pub fn measure(&mut self, wires: &[usize]) -> Result<&mut Self> {
        self.push(Gate::Measure { wires: wires.to_vec() })
    }

    /// Appends every gate of `other`, which must act on the same register.
    pub fn extend(&mut self, other: &QuantumCircuit) -> Result<&mut Self> {
        if other.num_qubits != self.num_qubits {
            return Err(LinalgError::DimensionMismatch { expected: self.num_qubits, found: other.num_qubits });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(self)
    }

    /// Same gates on a register of `num_qubits ≥ self.num_qubits()` wires.
    pub fn widened(&self, num_qubits: usize, output: usize) -> Result<QuantumCircuit> {
        if num_qubits < self.num_qubits {
            return Err(LinalgError::DimensionMismatch { expected: self.num_qubits, found: num_qubits });
        }
        let mut out = QuantumCircuit::new(num_qubits, output)?;
        out.gates = self.gates.clone();
        Ok(out)
    }

    /// Structural hash of the circuit: wires, gate matrices (bitwise) and
    /// oracle placeholders. Equal circuits hash equally across runs.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.num_qubits.hash(&mut h);
        self.output.hash(&mut h);
        for g in &self.gates {
            match g {
                Gate::Unitary { matrix, wires, controls } => {
                    0u8.hash(&mut h);
                    hash_matrix(matrix, &mut h);
                    wires.hash(&mut h);
                    controls.hash(&mut h);
                }
                Gate::Multiplexed { index, targets, controls, blocks } => {
                    1u8.hash(&mut h);
                    index.hash(&mut h);
                    targets.hash(&mut h);
                    controls.hash(&mut h);
                    for b in blocks {
                        hash_matrix(b, &mut h);
                    }
                }
                Gate::Oracle(call) => {
                    2u8.hash(&mut h);
                    call.level.hash(&mut h);
                    call.index.hash(&mut h);
                    call.targets.hash(&mut h);
                    call.control.hash(&mut h);
                }
                Gate::Measure { wires } => {
                    3u8.hash(&mut h);
                    wires.hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Number of oracle placeholders executed on every run.
    pub fn query_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Oracle(_))).count()
    }

    pub fn is_oracle_free(&self) -> bool {
        self.query_count() == 0
    }

    pub fn oracle_levels(&self) -> BTreeSet<usize> {
        self.oracle_calls().map(|c| c.level).collect()
    }

    pub fn oracle_calls(&self) -> impl Iterator<Item = &OracleCall> {
        self.gates.iter().filter_map(|g| match g {
            Gate::Oracle(c) => Some(c),
            _ => None,
        })
    }

    /// Every `(level, key)` that some run may query. An index register on
    /// wires addresses the whole level.
    pub fn addressed_keys(&self) -> BTreeSet<(usize, u64)> {
        let mut out = BTreeSet::new();
        for call in self.oracle_calls() {
            match call.index {
                OracleIndex::Fixed(k) => {
                    out.insert((call.level, k));
                }
                OracleIndex::Wires(_) => {
                    for k in 0..(1u64 << call.level) {
                        out.insert((call.level, k));
                    }
                }
            }
        }
        out
    }

    /// Replaces each oracle placeholder with the gate returned by `f`.
    pub fn map_oracles<F>(&self, mut f: F) -> Result<QuantumCircuit>
    where
        F: FnMut(&OracleCall) -> Result<Gate>,
    {
        let mut out = QuantumCircuit { num_qubits: self.num_qubits, output: self.output, gates: Vec::new() };
        for g in &self.gates {
            match g {
                Gate::Oracle(call) => {
                    let replacement = f(call)?;
                    out.push(replacement)?;
                }
                other => {
                    out.gates.push(other.clone());
                }
            }
        }
        Ok(out)
    }

    fn validate_gate(&self, gate: &Gate) -> Result<()> {
        let n = self.num_qubits;
        let check_wires = |ws: &[&[usize]]| -> Result<()> {
            let mut seen = BTreeSet::new();
            for w in ws.iter().flat_map(|s| s.iter()) {
                if *w >= n {
                    return Err(LinalgError::MalformedCircuit(format!("wire {w} out of range")));
                }
                if !seen.insert(*w) {
                    return Err(LinalgError::MalformedCircuit(format!("wire {w} used twice in one gate")));
                }
            }
            Ok(())
        };
        match gate {
            Gate::Unitary { matrix, wires, controls } => {
                check_wires(&[wires, controls])?;
                if matrix.dim() != 1 << wires.len() {
                    return Err(LinalgError::DimensionMismatch { expected: 1 << wires.len(), found: matrix.dim() });
                }
            }
            Gate::Multiplexed { index, targets, controls, blocks } => {
                check_wires(&[index, targets, controls])?;
                if blocks.len() != 1 << index.len() {
                    return Err(LinalgError::MalformedCircuit("multiplexer needs one block per index value".into()));
                }
                if blocks.iter().any(|b| b.dim() != 1 << targets.len()) {
                    return Err(LinalgError::MalformedCircuit("multiplexer block has wrong dimension".into()));
                }
            }
            Gate::Oracle(call) => {
                if call.level == 0 || call.targets.len() != call.level {
                    return Err(LinalgError::MalformedCircuit(format!(
                        "level-{} oracle call needs {} target wires",
                        call.level, call.level
                    )));
                }
                let ctrl: Vec<usize> = call.control.into_iter().collect();
                match &call.index {
                    OracleIndex::Wires(ix) => {
                        if ix.len() != call.level {
                            return Err(LinalgError::MalformedCircuit("index width must equal level".into()));
                        }
                        check_wires(&[ix, &call.targets, &ctrl])?;
                    }
                    OracleIndex::Fixed(k) => {
                        if call.level < 64 && *k >= 1u64 << call.level {
                            return Err(LinalgError::MalformedCircuit(format!("key {k} exceeds level width")));
                        }
                        check_wires(&[&call.targets, &ctrl])?;
                    }
                }
            }
            Gate::Measure { wires } => check_wires(&[wires])?,
        }
        Ok(())
    }
}

fn hash_matrix<H: Hasher>(u: &Unitary, h: &mut H) {
    u.dim().hash(h);
    for z in u.matrix().iter() {
        z.re.to_bits().hash(h);
        z.im.to_bits().hash(h);
    }
}

struct Kernel<'a> {
    targets: &'a [usize],
    controls: &'a [usize],
    index: &'a [usize],
}

fn bits_to_offset(value: usize, wires: &[usize]) -> usize {
    wires.iter().enumerate().fold(0, |acc, (i, &w)| acc | (((value >> i) & 1) << w))
}

fn read_bits(basis: usize, wires: &[usize]) -> usize {
    wires.iter().enumerate().fold(0, |acc, (i, &w)| acc | (((basis >> w) & 1) << i))
}

/// Applies a (possibly controlled, possibly multiplexed) block operator in place.
fn apply_kernel<'m, F>(amps: &mut DVector<C64>, kernel: Kernel<'_>, mut block: F) -> Result<()>
where
    F: FnMut(usize) -> Result<&'m DMatrix<C64>>,
{
    let k = kernel.targets.len();
    let offsets: Vec<usize> = (0..1usize << k).map(|t| bits_to_offset(t, kernel.targets)).collect();
    let target_mask = offsets[offsets.len() - 1];
    let control_mask = kernel.controls.iter().fold(0usize, |m, &c| m | (1 << c));
    let mut gathered = DVector::<C64>::zeros(1 << k);
    for base in 0..amps.len() {
        if base & target_mask != 0 || base & control_mask != control_mask {
            continue;
        }
        let m = block(read_bits(base, kernel.index))?;
        for (t, off) in offsets.iter().enumerate() {
            gathered[t] = amps[base | off];
        }
        let out = m * &gathered;
        for (t, off) in offsets.iter().enumerate() {
            amps[base | off] = out[t];
        }
    }
    Ok(())
}

fn apply_gate(amps: &mut DVector<C64>, gate: &Gate, binding: &dyn OracleBinding) -> Result<()> {
    match gate {
        Gate::Unitary { matrix, wires, controls } => {
            apply_kernel(amps, Kernel { targets: wires, controls, index: &[] }, |_| Ok(matrix.matrix()))
        }
        Gate::Multiplexed { index, targets, controls, blocks } => {
            apply_kernel(amps, Kernel { targets, controls, index }, |k| Ok(blocks[k].matrix()))
        }
        Gate::Oracle(call) => {
            let controls: Vec<usize> = call.control.into_iter().collect();
            let resolve = |key: u64| -> Result<&DMatrix<C64>> {
                let u = binding
                    .resolve(call.level, key)
                    .ok_or(LinalgError::UnresolvedPlaceholder { level: call.level, key })?;
                if u.num_qubits() != call.level {
                    return Err(LinalgError::DimensionMismatch { expected: 1 << call.level, found: u.dim() });
                }
                Ok(u.matrix())
            };
            match &call.index {
                OracleIndex::Fixed(k) => {
                    let m = resolve(*k)?;
                    apply_kernel(amps, Kernel { targets: &call.targets, controls: &controls, index: &[] }, |_| Ok(m))
                }
                OracleIndex::Wires(ix) => apply_kernel(
                    amps,
                    Kernel { targets: &call.targets, controls: &controls, index: ix },
                    |k| resolve(k as u64),
                ),
            }
        }
        Gate::Measure { .. } => unreachable!("measurements are handled by the caller"),
    }
}

fn check_input(c: &QuantumCircuit, input: &StateVector) -> Result<()> {
    log2_exact(input.dim())?;
    if input.dim() != c.dim() {
        return Err(LinalgError::DimensionMismatch { expected: c.dim(), found: input.dim() });
    }
    Ok(())
}

fn prob_one(amps: &DVector<C64>, wire: usize) -> f64 {
    amps.iter()
        .enumerate()
        .filter(|(i, _)| (i >> wire) & 1 == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Exact `Pr[output = 1]`, summing measurement branches analytically.
pub fn run_circuit_exact(c: &QuantumCircuit, input: &StateVector, binding: &dyn OracleBinding) -> Result<f64> {
    check_input(c, input)?;
    // Unnormalised branch states; their squared norms are branch probabilities.
    let mut branches = vec![input.amplitudes().clone()];
    for gate in &c.gates {
        match gate {
            Gate::Measure { wires } => {
                let mut next = Vec::with_capacity(branches.len() * 2);
                for amps in branches {
                    for outcome in 0..1usize << wires.len() {
                        let pattern = bits_to_offset(outcome, wires);
                        let mask = bits_to_offset((1 << wires.len()) - 1, wires);
                        let mut proj = amps.clone();
                        for (i, a) in proj.iter_mut().enumerate() {
                            if i & mask != pattern {
                                *a = C64::new(0.0, 0.0);
                            }
                        }
                        if proj.norm_squared() > 1e-300 {
                            next.push(proj);
                        }
                    }
                }
                branches = next;
            }
            g => {
                for amps in branches.iter_mut() {
                    apply_gate(amps, g, binding)?;
                }
            }
        }
    }
    let p: f64 = branches.iter().map(|a| prob_one(a, c.output)).sum();
    Ok(p.clamp(0.0, 1.0))
}

fn sample_measure<R: Rng + ?Sized>(amps: &mut DVector<C64>, wires: &[usize], rng: &mut R) {
    let mask = bits_to_offset((1 << wires.len()) - 1, wires);
    let mut weights = vec![0.0f64; 1 << wires.len()];
    for (i, a) in amps.iter().enumerate() {
        weights[read_bits(i & mask, wires)] += a.norm_sqr();
    }
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    let mut outcome = weights.len() - 1;
    for (o, w) in weights.iter().enumerate() {
        if r < *w {
            outcome = o;
            break;
        }
        r -= w;
    }
    let pattern = bits_to_offset(outcome, wires);
    let norm = weights[outcome].sqrt();
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask != pattern {
            *a = C64::new(0.0, 0.0);
        } else {
            *a /= norm;
        }
    }
}

/// Fraction of `shots` independent simulated runs whose output reads 1.
pub fn run_circuit_sampled<R: Rng + ?Sized>(
    c: &QuantumCircuit,
    input: &StateVector,
    binding: &dyn OracleBinding,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return Err(LinalgError::NoShots);
    }
    check_input(c, input)?;
    // The gate prefix before the first measurement is identical for every shot.
    let first_measure = c.gates.iter().position(|g| matches!(g, Gate::Measure { .. })).unwrap_or(c.gates.len());
    let mut prefix = input.amplitudes().clone();
    for g in &c.gates[..first_measure] {
        apply_gate(&mut prefix, g, binding)?;
    }
    if first_measure == c.gates.len() {
        let p = prob_one(&prefix, c.output).clamp(0.0, 1.0);
        let ones = Binomial::new(shots, p).expect("valid binomial").sample(rng);
        return Ok(ones as f64 / shots as f64);
    }
    let mut ones = 0u64;
    for _ in 0..shots {
        let mut amps = prefix.clone();
        for g in &c.gates[first_measure..] {
            match g {
                Gate::Measure { wires } => sample_measure(&mut amps, wires, rng),
                g => apply_gate(&mut amps, g, binding)?,
            }
        }
        if rng.random::<f64>() < prob_one(&amps, c.output) {
            ones += 1;
        }
    }
    Ok(ones as f64 / shots as f64)
}

/// Applies only the unitary part of an oracle-free, measurement-free circuit.
pub(crate) fn evolve(c: &QuantumCircuit, input: &StateVector, binding: &dyn OracleBinding) -> Result<StateVector> {
    check_input(c, input)?;
    let mut amps = input.amplitudes().clone();
    for g in &c.gates {
        if matches!(g, Gate::Measure { .. }) {
            return Err(LinalgError::MalformedCircuit("evolve() cannot cross a measurement".into()));
        }
        apply_gate(&mut amps, g, binding)?;
    }
    StateVector::normalized(amps)
}

/// Matrix of a measurement-free circuit, built column by column.
pub fn circuit_unitary(c: &QuantumCircuit, binding: &dyn OracleBinding) -> Result<Unitary> {
    let dim = c.dim();
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for j in 0..dim {
        let col = evolve(c, &StateVector::basis(dim, j)?, binding)?;
        mat.set_column(j, col.amplitudes());
    }
    Ok(Unitary::new_unchecked(mat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::sample_haar_unitary;
    use crate::linalg::gates;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    struct MapBinding(HashMap<(usize, u64), Unitary>);

    impl OracleBinding for MapBinding {
        fn resolve(&self, level: usize, key: u64) -> Option<&Unitary> {
            self.0.get(&(level, key))
        }
    }

    #[test]
    fn direct_measurements() {
        let mut c = QuantumCircuit::new(1, 0).unwrap();
        c.measure(&[0]).unwrap();
        let one = StateVector::basis(2, 1).unwrap();
        let zero = StateVector::zero(1).unwrap();
        assert_eq!(run_circuit_exact(&c, &one, &NoOracle).unwrap(), 1.0);
        assert_eq!(run_circuit_exact(&c, &zero, &NoOracle).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(run_circuit_sampled(&c, &one, &NoOracle, 100, &mut rng).unwrap(), 1.0);
        assert_eq!(run_circuit_sampled(&c, &zero, &NoOracle, 100, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn hadamard_statistics() {
        let mut c = QuantumCircuit::new(1, 0).unwrap();
        c.h(0).unwrap().measure(&[0]).unwrap();
        let zero = StateVector::zero(1).unwrap();
        assert!((run_circuit_exact(&c, &zero, &NoOracle).unwrap() - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Binomial(1e5, 1/2) has sd 0.0016; 0.01 is over six sigma.
        let p = run_circuit_sampled(&c, &zero, &NoOracle, 100_000, &mut rng).unwrap();
        assert!((p - 0.5).abs() < 0.01);
    }

    #[test]
    fn mid_circuit_measurement_kills_interference() {
        // H, measure, H: the measurement decoheres, so Pr[1] = 1/2 rather than 0.
        let mut c = QuantumCircuit::new(1, 0).unwrap();
        c.h(0).unwrap().measure(&[0]).unwrap().h(0).unwrap();
        let p = run_circuit_exact(&c, &StateVector::zero(1).unwrap(), &NoOracle).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let mut c2 = QuantumCircuit::new(1, 0).unwrap();
        c2.h(0).unwrap().h(0).unwrap();
        assert!(run_circuit_exact(&c2, &StateVector::zero(1).unwrap(), &NoOracle).unwrap() < 1e-12);
    }

    #[test]
    fn cnot_uses_little_endian_wires() {
        let mut c = QuantumCircuit::new(2, 1).unwrap();
        c.cnot(0, 1).unwrap();
        // |01⟩ in little-endian is index 1: wire 0 set.
        let p = run_circuit_exact(&c, &StateVector::basis(4, 1).unwrap(), &NoOracle).unwrap();
        assert_eq!(p, 1.0);
        let p = run_circuit_exact(&c, &StateVector::basis(4, 2).unwrap(), &NoOracle).unwrap();
        assert_eq!(p, 1.0);
        let p = run_circuit_exact(&c, &StateVector::basis(4, 0).unwrap(), &NoOracle).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn unresolved_placeholder_is_an_error() {
        let mut c = QuantumCircuit::new(1, 0).unwrap();
        c.oracle(1, OracleIndex::Fixed(1), &[0]).unwrap();
        let err = run_circuit_exact(&c, &StateVector::zero(1).unwrap(), &NoOracle).unwrap_err();
        assert_eq!(err, LinalgError::UnresolvedPlaceholder { level: 1, key: 1 });
    }

    #[test]
    fn malformed_oracle_calls_rejected() {
        let mut c = QuantumCircuit::new(3, 0).unwrap();
        assert!(c.oracle(2, OracleIndex::Fixed(0), &[0]).is_err());
        assert!(c.oracle(1, OracleIndex::Wires(vec![0, 1]), &[2]).is_err());
        assert!(c.oracle(1, OracleIndex::Wires(vec![0]), &[0]).is_err());
        assert!(c.oracle(1, OracleIndex::Fixed(2), &[0]).is_err());
        assert!(QuantumCircuit::new(2, 2).is_err());
    }

    #[test]
    fn wire_indexed_oracle_multiplexes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u0 = sample_haar_unitary(2, &mut rng).unwrap();
        let u1 = sample_haar_unitary(2, &mut rng).unwrap();
        let binding = MapBinding(HashMap::from([((1, 0), u0.clone()), ((1, 1), u1.clone())]));
        let mut c = QuantumCircuit::new(2, 1).unwrap();
        c.oracle(1, OracleIndex::Wires(vec![0]), &[1]).unwrap();
        for (input, u) in [(0usize, &u0), (1, &u1)] {
            let p = run_circuit_exact(&c, &StateVector::basis(4, input).unwrap(), &binding).unwrap();
            assert!((p - u.matrix()[(1, 0)].norm_sqr()).abs() < 1e-12);
        }
        assert_eq!(c.addressed_keys().len(), 2);
        assert_eq!(c.query_count(), 1);
    }

    #[test]
    fn controlled_oracle_only_fires_on_control() {
        let binding = MapBinding(HashMap::from([((1, 0), gates::x())]));
        let mut c = QuantumCircuit::new(2, 1).unwrap();
        c.controlled_oracle(0, 1, OracleIndex::Fixed(0), &[1]).unwrap();
        assert_eq!(run_circuit_exact(&c, &StateVector::basis(4, 0).unwrap(), &binding).unwrap(), 0.0);
        assert_eq!(run_circuit_exact(&c, &StateVector::basis(4, 1).unwrap(), &binding).unwrap(), 1.0);
    }

    #[test]
    fn swap_test_acceptance_matches_overlap() {
        // Register a on wire 1, b on wire 2, ancilla wire 0; output reads 1 on "same".
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = sample_haar_unitary(2, &mut rng).unwrap().column(0);
            let b = sample_haar_unitary(2, &mut rng).unwrap().column(0);
            let mut c = QuantumCircuit::new(3, 0).unwrap();
            c.h(0).unwrap().cswap(0, &[1], &[2]).unwrap().h(0).unwrap().x(0).unwrap().measure(&[0]).unwrap();
            let input = StateVector::zero(1).unwrap().tensor(&a).unwrap().tensor(&b).unwrap();
            let p = run_circuit_exact(&c, &input, &NoOracle).unwrap();
            let overlap = a.overlap(&b).unwrap();
            assert!((p - (1.0 + overlap) / 2.0).abs() < 1e-12);
        }
    }
}
