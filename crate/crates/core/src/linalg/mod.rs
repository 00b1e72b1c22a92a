//! Dense complex linear algebra over small Hilbert spaces.
//!
//! Basis ordering is little-endian throughout the crate: wire `i` of an
//! `n`-qubit register is bit `i` of the basis index.

mod circuit;
pub mod gates;

pub(crate) use circuit::evolve;
pub use circuit::{
    circuit_unitary, run_circuit_exact, run_circuit_sampled, Gate, NoOracle, OracleBinding, OracleCall, OracleIndex,
    QuantumCircuit,
};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Largest register handled by the dense simulator.
pub const MAX_QUBITS: usize = 12;

pub const NORM_TOL: f64 = 1e-9;
pub const UNITARY_TOL: f64 = 1e-8;
pub const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("dimension {0} exceeds the dense cap of 2^{MAX_QUBITS}")]
    DimensionCap(usize),
    #[error("state is not normalised (norm {0})")]
    NotNormalized(f64),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    InvalidTrace(f64),
    #[error("matrix has negative eigenvalue {0:.3e}")]
    NotPsd(f64),
    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),
    #[error("no unitary bound for oracle level {level}, key {key}")]
    UnresolvedPlaceholder { level: usize, key: u64 },
    #[error("shots must be at least 1")]
    NoShots,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

pub(crate) fn log2_exact(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(LinalgError::NotPowerOfTwo(dim));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(LinalgError::DimensionCap(dim));
    }
    Ok(n)
}

/// Normalised pure state on `log2(dim)` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        log2_exact(amps.len())?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(LinalgError::NotNormalized(norm));
        }
        Ok(Self { amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        Self::new(DVector::from_vec(amps))
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        log2_exact(amps.len())?;
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LinalgError::NotNormalized(norm));
        }
        Ok(Self { amps: amps / C64::new(norm, 0.0) })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        log2_exact(dim)?;
        if index >= dim {
            return Err(LinalgError::DimensionMismatch { expected: dim, found: index });
        }
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(1 << num_qubits, 0)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `self ⊗ other`, with `self` on the low wires.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let dim = self.dim() * other.dim();
        log2_exact(dim)?;
        let mut amps = DVector::zeros(dim);
        for (hi, b) in other.amps.iter().enumerate() {
            for (lo, a) in self.amps.iter().enumerate() {
                amps[hi * self.dim() + lo] = a * b;
            }
        }
        Ok(Self { amps })
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { mat: &self.amps * self.amps.adjoint() }
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Square unitary matrix with a power-of-two dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    mat: DMatrix<C64>,
}

impl Unitary {
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(LinalgError::DimensionMismatch { expected: mat.nrows(), found: mat.ncols() });
        }
        log2_exact(mat.nrows())?;
        let dev = unitarity_deviation(&mat);
        if dev > UNITARY_TOL {
            return Err(LinalgError::NotUnitary(dev));
        }
        Ok(Self { mat })
    }

    /// Wraps a matrix known to be unitary up to rounding; only the shape is checked.
    pub(crate) fn new_unchecked(mat: DMatrix<C64>) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        log2_exact(dim)?;
        Ok(Self { mat: DMatrix::identity(dim, dim) })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary { mat: self.mat.adjoint() }
    }

    pub fn mul(&self, other: &Unitary) -> Result<Unitary> {
        check_dim(self.dim(), other.dim())?;
        Ok(Unitary { mat: &self.mat * &other.mat })
    }

    pub fn scaled_by_phase(&self, phase: C64) -> Unitary {
        Unitary { mat: &self.mat * phase }
    }

    pub fn column(&self, j: usize) -> StateVector {
        StateVector { amps: self.mat.column(j).into_owned() }
    }

    pub fn deviation_from_unitary(&self) -> f64 {
        unitarity_deviation(&self.mat)
    }

    pub fn max_abs_diff(&self, other: &Unitary) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn conjugate(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_dim(self.dim(), rho.dim())?;
        Ok(DensityMatrix { mat: &self.mat * &rho.mat * self.mat.adjoint() })
    }

    /// Eigenvalues of the unitary, read off the complex Schur form.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let (_, t) = Schur::new(self.mat.clone()).unpack();
        (0..t.nrows()).map(|i| t[(i, i)]).collect()
    }
}

fn unitarity_deviation(mat: &DMatrix<C64>) -> f64 {
    let prod = mat.adjoint() * mat;
    let n = mat.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// Positive semidefinite, unit-trace, Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(LinalgError::DimensionMismatch { expected: mat.nrows(), found: mat.ncols() });
        }
        let herm = hermitian_deviation(&mat);
        if herm > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(herm));
        }
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > HERMITIAN_TOL || trace.im.abs() > HERMITIAN_TOL {
            return Err(LinalgError::InvalidTrace(trace.re));
        }
        let min_eig = SymmetricEigen::new(mat.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -HERMITIAN_TOL {
            return Err(LinalgError::NotPsd(min_eig));
        }
        Ok(Self { mat })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }
}

fn hermitian_deviation(mat: &DMatrix<C64>) -> f64 {
    let n = mat.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    dev
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(LinalgError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Returns `U ψ`.
pub fn apply_unitary(u: &Unitary, psi: &StateVector) -> Result<StateVector> {
    check_dim(u.dim(), psi.dim())?;
    Ok(StateVector { amps: &u.mat * &psi.amps })
}

/// Half the trace norm of `ρ − σ`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dim(rho.dim(), sigma.dim())?;
    let diff = &rho.mat - &sigma.mat;
    let herm = hermitian_deviation(&diff);
    if herm > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(herm));
    }
    let eig = SymmetricEigen::new(diff);
    let td = 0.5 * eig.eigenvalues.iter().map(|e| e.abs()).sum::<f64>();
    Ok(td.clamp(0.0, 1.0))
}

/// Diamond distance between the channels `ρ ↦ UρU†` and `ρ ↦ VρV†`.
///
/// Equals `2·sqrt(1 − ν²)` where `ν` is the distance from the origin to the
/// convex hull of the spectrum of `V†U`. The spectrum lies on the unit
/// circle, so the hull misses the origin exactly when every eigenvalue sits
/// inside an open half-circle; then `ν = cos(w/2)` for the angular width `w`
/// of the smallest covering arc.
pub fn diamond_distance_unitary(u: &Unitary, v: &Unitary) -> Result<f64> {
    check_dim(u.dim(), v.dim())?;
    let w = Unitary::new_unchecked(v.mat.adjoint() * &u.mat);
    let nu = hull_distance_on_circle(&w.eigenvalues());
    Ok(2.0 * (1.0 - nu * nu).max(0.0).sqrt())
}

fn hull_distance_on_circle(eigs: &[C64]) -> f64 {
    let mut angles: Vec<f64> = eigs.iter().map(|z| z.arg()).collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    if angles.len() <= 1 {
        return 1.0;
    }
    let mut max_gap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    let width = std::f64::consts::TAU - max_gap;
    if width >= std::f64::consts::PI {
        0.0
    } else {
        (width / 2.0).cos()
    }
}

/// `A ⊗ B` with `A` acting on the high wires.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Nearest unitary in Frobenius norm (polar factor `W V†` of the SVD).
pub fn polar_unitary(mat: &DMatrix<C64>) -> Unitary {
    let svd = mat.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    Unitary::new_unchecked(u * v_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::sample_haar_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_leaves_state_alone() {
        let psi = StateVector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let out = apply_unitary(&Unitary::identity(2).unwrap(), &psi).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn pauli_x_flips_and_hadamard_balances() {
        let zero = StateVector::zero(1).unwrap();
        let one = apply_unitary(&gates::x(), &zero).unwrap();
        assert_eq!(one, StateVector::basis(2, 1).unwrap());
        let plus = apply_unitary(&gates::h(), &zero).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((plus.amplitudes()[0] - c(r, 0.0)).norm() < 1e-15);
        assert!((plus.amplitudes()[1] - c(r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn apply_rejects_mismatched_dims() {
        let err = apply_unitary(&gates::h(), &StateVector::zero(2).unwrap()).unwrap_err();
        assert_eq!(err, LinalgError::DimensionMismatch { expected: 2, found: 4 });
    }

    #[test]
    fn state_constructor_enforces_invariants() {
        assert!(matches!(
            StateVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(LinalgError::NotNormalized(_))
        ));
        assert!(matches!(
            StateVector::from_amplitudes(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            Err(LinalgError::NotPowerOfTwo(3))
        ));
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(Unitary::new(bad), Err(LinalgError::NotUnitary(_))));
    }

    #[test]
    fn trace_distance_examples() {
        let zero = StateVector::zero(1).unwrap().density();
        let one = StateVector::basis(2, 1).unwrap().density();
        let plus = apply_unitary(&gates::h(), &StateVector::zero(1).unwrap()).unwrap().density();
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-12);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
        // Eigenvalues of |0⟩⟨0| − |+⟩⟨+| are ±1/√2 (hand-diagonalised 2×2 difference).
        assert!((trace_distance(&zero, &plus).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn trace_distance_rejects_non_hermitian_difference() {
        let zero = StateVector::zero(1).unwrap().density();
        let mut m = zero.matrix().clone();
        m[(0, 1)] = c(0.0, 0.3);
        let bogus = DensityMatrix { mat: m };
        assert!(matches!(trace_distance(&zero, &bogus), Err(LinalgError::NotHermitian(_))));
    }

    #[test]
    fn density_constructor_checks() {
        let mut m = DMatrix::<C64>::identity(2, 2);
        assert!(matches!(DensityMatrix::new(m.clone()), Err(LinalgError::InvalidTrace(_))));
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(LinalgError::NotPsd(_))));
    }

    #[test]
    fn diamond_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = sample_haar_unitary(4, &mut rng).unwrap();
        assert!(diamond_distance_unitary(&u, &u).unwrap() < 1e-6);
        let phased = u.scaled_by_phase(C64::from_polar(1.0, 0.77));
        assert!(diamond_distance_unitary(&u, &phased).unwrap() < 1e-6);
        let d = diamond_distance_unitary(&Unitary::identity(2).unwrap(), &gates::z()).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diamond_of_small_rotation() {
        // diag(1, e^{iθ}) vs I: arc width θ, ν = cos(θ/2), distance 2 sin(θ/2).
        let theta = 0.3f64;
        let mut m = DMatrix::<C64>::identity(2, 2);
        m[(1, 1)] = C64::from_polar(1.0, theta);
        let u = Unitary::new(m).unwrap();
        let d = diamond_distance_unitary(&u, &Unitary::identity(2).unwrap()).unwrap();
        assert!((d - 2.0 * (theta / 2.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn polar_projection_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = sample_haar_unitary(4, &mut rng).unwrap();
        let noisy = u.matrix() + DMatrix::from_element(4, 4, c(0.01, -0.02));
        let p = polar_unitary(&noisy);
        assert!(p.deviation_from_unitary() < 1e-12);
        assert!(p.max_abs_diff(&u) < 0.1);
    }

    #[test]
    fn tensor_puts_first_factor_on_low_wires() {
        let one = StateVector::basis(2, 1).unwrap();
        let zero = StateVector::zero(1).unwrap();
        assert_eq!(one.tensor(&zero).unwrap(), StateVector::basis(4, 1).unwrap());
        assert_eq!(zero.tensor(&one).unwrap(), StateVector::basis(4, 2).unwrap());
    }
}
