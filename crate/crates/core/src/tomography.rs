//! Black-box unitary process tomography with exact query accounting.
//!
//! Columns `U|j⟩` are estimated by Pauli-product state tomography, relative
//! column phases from inputs `(|0⟩+|j⟩)/√2`, and the global phase from a
//! Hadamard test with controlled queries on an eigenvector of the estimate.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::haar::OracleSession;
use crate::linalg::gates::PauliAxis;
use crate::linalg::{
    apply_unitary, diamond_distance_unitary, polar_unitary, NoOracle, QuantumCircuit, StateVector, Unitary, C64,
};
use crate::{Error, Result};

/// Default implementation constant `K` in the budget `K·(d²/ε)·ln(1/η)`.
pub const DEFAULT_BUDGET_CONSTANT: f64 = 100.0;

/// Forward-only access to an unknown unitary. Every shot is one query.
pub trait BlackBox {
    fn dim(&self) -> usize;

    fn queries(&self) -> u64;

    /// Outcome counts of `shots` rounds of: prepare `input`, query once,
    /// measure qubit `i` in the eigenbasis of `axes[i]`.
    fn pauli_counts(
        &mut self,
        input: &StateVector,
        axes: &[PauliAxis],
        shots: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<u64>>;

    /// Ancilla outcome-0 count of `shots` Hadamard tests: ancilla `|+⟩`,
    /// system `v`, controlled query, ancilla read in the `axis` basis.
    fn hadamard_counts(&mut self, v: &StateVector, axis: PauliAxis, shots: u64, rng: &mut dyn RngCore)
        -> Result<u64>;
}

fn multinomial(probs: &[f64], shots: u64, rng: &mut dyn RngCore) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(remaining, q).expect("probability in range").sample(rng);
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    counts
}

fn pauli_probs(u: &Unitary, input: &StateVector, axes: &[PauliAxis]) -> Result<Vec<f64>> {
    let out = apply_unitary(u, input)?;
    let mut c = QuantumCircuit::new(axes.len(), 0)?;
    for (w, axis) in axes.iter().enumerate() {
        c.apply(axis.readout_rotation(), &[w])?;
    }
    let rotated = crate::linalg::evolve(&c, &out, &NoOracle)?;
    Ok(rotated.amplitudes().iter().map(|a| a.norm_sqr()).collect())
}

fn hadamard_prob_zero(u: &Unitary, v: &StateVector, axis: PauliAxis) -> Result<f64> {
    let z = v.inner(&apply_unitary(u, v)?)?;
    let expectation = match axis {
        PauliAxis::X => z.re,
        PauliAxis::Y => z.im,
        PauliAxis::Z => return Err(Error::invalid("Hadamard test reads X or Y")),
    };
    Ok(((1.0 + expectation) / 2.0).clamp(0.0, 1.0))
}

fn check_axes(dim: usize, axes: &[PauliAxis]) -> Result<()> {
    if 1usize << axes.len() != dim {
        return Err(Error::invalid(format!("{} readout axes for dimension {dim}", axes.len())));
    }
    Ok(())
}

/// Black box around a known matrix, for tests and audits.
pub struct SimulatedBox<'u> {
    unitary: &'u Unitary,
    queries: u64,
}

impl<'u> SimulatedBox<'u> {
    pub fn new(unitary: &'u Unitary) -> Self {
        SimulatedBox { unitary, queries: 0 }
    }
}

impl BlackBox for SimulatedBox<'_> {
    fn dim(&self) -> usize {
        self.unitary.dim()
    }

    fn queries(&self) -> u64 {
        self.queries
    }

    fn pauli_counts(
        &mut self,
        input: &StateVector,
        axes: &[PauliAxis],
        shots: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<u64>> {
        check_axes(self.dim(), axes)?;
        let probs = pauli_probs(self.unitary, input, axes)?;
        self.queries += shots;
        Ok(multinomial(&probs, shots, rng))
    }

    fn hadamard_counts(
        &mut self,
        v: &StateVector,
        axis: PauliAxis,
        shots: u64,
        rng: &mut dyn RngCore,
    ) -> Result<u64> {
        let p = hadamard_prob_zero(self.unitary, v, axis)?;
        self.queries += shots;
        Ok(Binomial::new(shots, p).expect("probability in range").sample(rng))
    }
}

/// Black box over one oracle entry `U_{k,ℓ}`, charging the session counter.
pub struct OracleBox<'s, 'a> {
    session: &'s mut OracleSession<'a>,
    level: usize,
    key: u64,
    start: u64,
}

impl<'s, 'a> OracleBox<'s, 'a> {
    pub fn new(session: &'s mut OracleSession<'a>, level: usize, key: u64) -> Result<Self> {
        session.family().level_size(level)?;
        if key >= 1 << level {
            return Err(Error::KeyOutOfRange { level, key });
        }
        let start = session.queries();
        Ok(OracleBox { session, level, key, start })
    }
}

impl BlackBox for OracleBox<'_, '_> {
    fn dim(&self) -> usize {
        1 << self.level
    }

    fn queries(&self) -> u64 {
        self.session.queries() - self.start
    }

    fn pauli_counts(
        &mut self,
        input: &StateVector,
        axes: &[PauliAxis],
        shots: u64,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<u64>> {
        check_axes(self.dim(), axes)?;
        let u = self.session.simulate_queries(self.level, self.key, shots)?;
        Ok(multinomial(&pauli_probs(u, input, axes)?, shots, rng))
    }

    fn hadamard_counts(
        &mut self,
        v: &StateVector,
        axis: PauliAxis,
        shots: u64,
        rng: &mut dyn RngCore,
    ) -> Result<u64> {
        let u = self.session.simulate_queries(self.level, self.key, shots)?;
        let p = hadamard_prob_zero(u, v, axis)?;
        Ok(Binomial::new(shots, p).expect("probability in range").sample(rng))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyResult {
    pub estimate: Unitary,
    pub queries_used: u64,
    pub eps_target: f64,
    pub eta_target: f64,
    pub budget: u64,
    pub budget_constant: f64,
    pub converged: bool,
    /// Filled by callers that know the truth.
    pub achieved_diamond_error: Option<f64>,
}

impl TomographyResult {
    pub fn record(&self) -> TomographyRecord {
        TomographyRecord {
            dim: self.estimate.dim(),
            queries_used: self.queries_used,
            eps_target: self.eps_target,
            eta_target: self.eta_target,
            budget: self.budget,
            budget_constant: self.budget_constant,
            converged: self.converged,
            achieved_diamond_error: self.achieved_diamond_error,
        }
    }

    pub fn score_against(&mut self, truth: &Unitary) -> Result<f64> {
        let d = diamond_distance_unitary(&self.estimate, truth)?;
        self.achieved_diamond_error = Some(d);
        Ok(d)
    }
}

/// Serializable summary of a tomography run (the estimate matrix omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub dim: usize,
    pub queries_used: u64,
    pub eps_target: f64,
    pub eta_target: f64,
    pub budget: u64,
    pub budget_constant: f64,
    pub converged: bool,
    pub achieved_diamond_error: Option<f64>,
}

/// `⌈K·(d²/ε)·ln(1/η)⌉`.
pub fn query_budget(dim: usize, eps: f64, eta: f64, k: f64) -> u64 {
    (k * (dim * dim) as f64 / eps * (1.0 / eta).ln()).ceil() as u64
}

fn single_qubit_estimator(axis: PauliAxis, outcome: usize) -> DMatrix<C64> {
    axis.eigenprojector(outcome) * C64::new(3.0, 0.0) - DMatrix::<C64>::identity(2, 2)
}

fn axes_for_setting(mut s: usize, n: usize) -> Vec<PauliAxis> {
    (0..n)
        .map(|_| {
            let a = PauliAxis::ALL[s % 3];
            s /= 3;
            a
        })
        .collect()
}

/// Linear-inversion estimate `3^{-n} Σ_s Σ_o p̂(o|s) ⊗_i (3|b_{s_i,o_i}⟩⟨b| − I)`.
fn estimate_state(
    bb: &mut dyn BlackBox,
    input: &StateVector,
    shots_per_setting: u64,
    rng: &mut dyn RngCore,
) -> Result<DMatrix<C64>> {
    let dim = bb.dim();
    let n = dim.trailing_zeros() as usize;
    let settings = 3usize.pow(n as u32);
    let estimators: Vec<[DMatrix<C64>; 2]> = PauliAxis::ALL
        .iter()
        .map(|&a| [single_qubit_estimator(a, 0), single_qubit_estimator(a, 1)])
        .collect();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for s in 0..settings {
        let axes = axes_for_setting(s, n);
        let counts = bb.pauli_counts(input, &axes, shots_per_setting, rng)?;
        // Contract qubit by qubit: level q holds one block per assignment of
        // the outcome bits above q.
        let mut blocks: Vec<DMatrix<C64>> = counts
            .iter()
            .map(|&c| DMatrix::from_element(1, 1, C64::new(c as f64 / shots_per_setting as f64, 0.0)))
            .collect();
        for axis in &axes {
            let [e0, e1] = &estimators[*axis as usize];
            blocks = blocks.chunks(2).map(|pair| e0.kronecker(&pair[0]) + e1.kronecker(&pair[1])).collect();
        }
        rho += &blocks[0];
    }
    Ok(rho / C64::new(settings as f64, 0.0))
}

fn leading_eigenvector(rho: &DMatrix<C64>) -> DVector<C64> {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let (best, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    eig.eigenvectors.column(best).into_owned()
}

pub fn process_tomography(
    bb: &mut dyn BlackBox,
    eps: f64,
    eta: f64,
    budget_constant: f64,
    rng: &mut dyn RngCore,
) -> Result<TomographyResult> {
    if !(eps > 0.0 && eps < 1.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("tomography needs ε, η in (0, 1); got {eps}, {eta}")));
    }
    let dim = bb.dim();
    let n = dim.trailing_zeros() as usize;
    let settings = 3u64.pow(n as u32);
    let start = bb.queries();
    let budget = query_budget(dim, eps, eta, budget_constant);
    let stage = budget / (2 * dim as u64);
    let per_setting = stage / settings;
    let mut converged = per_setting >= 1;
    let per_setting = per_setting.max(1);
    let phase_shots = (stage / 2).max(1);

    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(dim);
    for j in 0..dim {
        let rho = estimate_state(bb, &StateVector::basis(dim, j)?, per_setting, rng)?;
        columns.push(leading_eigenvector(&rho));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut assembled = DMatrix::<C64>::zeros(dim, dim);
    assembled.set_column(0, &columns[0]);
    for j in 1..dim {
        let mut amps = DVector::<C64>::zeros(dim);
        amps[0] = C64::new(r, 0.0);
        amps[j] = C64::new(r, 0.0);
        let rho = estimate_state(bb, &StateVector::new(amps)?, per_setting, rng)?;
        let overlap = columns[j].dotc(&(&rho * &columns[0]));
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
        assembled.set_column(j, &(&columns[j] * phase));
    }
    let projected = polar_unitary(&assembled);

    let (q, t) = Schur::new(projected.matrix().clone()).unpack();
    let v = StateVector::normalized(q.column(0).into_owned())?;
    let lambda = t[(0, 0)];
    let zero_x = bb.hadamard_counts(&v, PauliAxis::X, phase_shots, rng)?;
    let zero_y = bb.hadamard_counts(&v, PauliAxis::Y, phase_shots, rng)?;
    let z = C64::new(
        2.0 * zero_x as f64 / phase_shots as f64 - 1.0,
        2.0 * zero_y as f64 / phase_shots as f64 - 1.0,
    );
    let correction = z / lambda;
    if correction.norm() < 0.5 {
        converged = false;
    }
    let phase = if correction.norm() > 0.0 { correction / correction.norm() } else { C64::new(1.0, 0.0) };
    let estimate = projected.scaled_by_phase(phase);

    let queries_used = bb.queries() - start;
    if queries_used > budget {
        converged = false;
    }
    Ok(TomographyResult {
        estimate,
        queries_used,
        eps_target: eps,
        eta_target: eta,
        budget,
        budget_constant,
        converged,
        achieved_diamond_error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{build_oracle_family, sample_haar_unitary};
    use crate::linalg::gates;
    use crate::seeds;

    #[test]
    fn multinomial_conserves_shots() {
        let mut rng = seeds::rng(1);
        let c = multinomial(&[0.2, 0.3, 0.5], 1_000_000_000_000, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1_000_000_000_000);
        assert!((c[2] as f64 / 1e12 - 0.5).abs() < 1e-4);
    }

    #[test]
    fn identity_is_recovered() {
        let id = Unitary::identity(2).unwrap();
        let mut bb = SimulatedBox::new(&id);
        let mut r = process_tomography(&mut bb, 0.1, 0.1, DEFAULT_BUDGET_CONSTANT, &mut seeds::rng(2)).unwrap();
        assert!(r.score_against(&id).unwrap() <= 0.3);
        assert_eq!(r.queries_used, bb.queries());
        assert!(r.queries_used <= r.budget);
        assert!(r.converged);
    }

    #[test]
    fn global_phase_is_invisible() {
        let u = Unitary::identity(2).unwrap().scaled_by_phase(C64::from_polar(1.0, 1.3));
        let mut bb = SimulatedBox::new(&u);
        let r = process_tomography(&mut bb, 0.05, 0.1, DEFAULT_BUDGET_CONSTANT, &mut seeds::rng(3)).unwrap();
        let id = Unitary::identity(2).unwrap();
        assert!(diamond_distance_unitary(&r.estimate, &id).unwrap() < 0.2);
        // The Hadamard test also pins the absolute phase.
        assert!(r.estimate.max_abs_diff(&u) < 0.1);
    }

    #[test]
    fn haar_truths_at_dim_four() {
        let mut rng = seeds::rng(4);
        for _ in 0..10 {
            let u = sample_haar_unitary(4, &mut rng).unwrap();
            let mut bb = SimulatedBox::new(&u);
            let mut r = process_tomography(&mut bb, 0.2, 0.05, DEFAULT_BUDGET_CONSTANT, &mut rng).unwrap();
            assert!(r.score_against(&u).unwrap() <= 0.6);
            assert!(r.estimate.max_abs_diff(&u) < 0.5);
        }
    }

    #[test]
    fn oracle_box_charges_the_session() {
        let f = build_oracle_family(2, 17).unwrap();
        let mut session = f.session();
        let mut bb = OracleBox::new(&mut session, 2, 1).unwrap();
        let r = process_tomography(&mut bb, 0.2, 0.1, DEFAULT_BUDGET_CONSTANT, &mut seeds::rng(5)).unwrap();
        assert_eq!(session.queries(), r.queries_used);
        assert!(OracleBox::new(&mut session, 3, 0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let h = gates::h();
        let mut bb = SimulatedBox::new(&h);
        assert!(process_tomography(&mut bb, 0.0, 0.1, 1.0, &mut seeds::rng(1)).is_err());
        assert!(process_tomography(&mut bb, 0.1, 1.0, 1.0, &mut seeds::rng(1)).is_err());
    }

    #[test]
    fn starved_budget_is_flagged() {
        let u = gates::h();
        let mut bb = SimulatedBox::new(&u);
        let r = process_tomography(&mut bb, 0.9, 0.9, 0.001, &mut seeds::rng(6)).unwrap();
        assert!(!r.converged);
        assert!(r.estimate.deviation_from_unitary() < 1e-8);
    }
}
