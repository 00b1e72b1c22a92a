use haarsep::haar::sample_haar_unitary;
use haarsep::linalg::{
    apply_unitary, diamond_distance_unitary, run_circuit_exact, run_circuit_sampled, trace_distance, DensityMatrix,
    NoOracle, QuantumCircuit, StateVector, Unitary, C64,
};
use haarsep::seeds;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_state(dim: usize, rng: &mut impl Rng) -> StateVector {
    sample_haar_unitary(dim, rng).unwrap().column(0)
}

fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let rank = rng.random_range(1..=dim);
    let weights: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for w in weights {
        let psi = random_state(dim, rng);
        let a = psi.amplitudes();
        m += a * a.adjoint() * C64::new(w / total, 0.0);
    }
    DensityMatrix::new(m).unwrap()
}

/// Distance from the origin to the convex hull of planar points, by brute
/// force: zero if the origin lies in a non-degenerate triangle of three
/// points, otherwise the least distance to a segment between two points.
fn hull_distance_brute(points: &[(f64, f64)]) -> f64 {
    let cross = |a: (f64, f64), b: (f64, f64)| a.0 * b.1 - a.1 * b.0;
    let sub = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0, a.1 - b.1);
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (points[i], points[j], points[k]);
                if cross(sub(b, a), sub(c, a)).abs() < 1e-9 {
                    continue;
                }
                let o = (0.0, 0.0);
                let d1 = cross(sub(b, a), sub(o, a));
                let d2 = cross(sub(c, b), sub(o, b));
                let d3 = cross(sub(a, c), sub(o, c));
                let neg = d1 < -1e-12 || d2 < -1e-12 || d3 < -1e-12;
                let pos = d1 > 1e-12 || d2 > 1e-12 || d3 > 1e-12;
                if !(neg && pos) {
                    return 0.0;
                }
            }
        }
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i..n {
            let (a, b) = (points[i], points[j]);
            let ab = sub(b, a);
            let len2 = ab.0 * ab.0 + ab.1 * ab.1;
            let t = if len2 > 0.0 { (-(a.0 * ab.0 + a.1 * ab.1) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let p = (a.0 + t * ab.0, a.1 + t * ab.1);
            best = best.min((p.0 * p.0 + p.1 * p.1).sqrt());
        }
    }
    best
}

fn diamond_oracle(u: &Unitary, v: &Unitary) -> f64 {
    let w = v.adjoint().mul(u).unwrap();
    let eig = w.matrix().clone().complex_eigenvalues_fallback();
    let nu = hull_distance_brute(&eig);
    2.0 * (1.0 - nu * nu).max(0.0).sqrt()
}

trait Eigen {
    fn complex_eigenvalues_fallback(self) -> Vec<(f64, f64)>;
}

impl Eigen for DMatrix<C64> {
    fn complex_eigenvalues_fallback(self) -> Vec<(f64, f64)> {
        let schur = nalgebra::Schur::new(self);
        let t = schur.unpack().1;
        (0..t.nrows()).map(|i| (t[(i, i)].re, t[(i, i)].im)).collect()
    }
}

#[test]
fn trace_distance_zero_plus() {
    let zero = StateVector::basis(2, 0).unwrap().density();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::from_amplitudes(vec![C64::new(r, 0.0), C64::new(r, 0.0)]).unwrap().density();
    // ρ − σ = [[1/2, −1/2], [−1/2, −1/2]] has eigenvalues ±√(a² + b²).
    let (a, b) = (0.5f64, 0.5f64);
    let oracle = (a * a + b * b).sqrt();
    let td = trace_distance(&zero, &plus).unwrap();
    assert!((td - oracle).abs() < 1e-6 && (td - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{td}");
}

#[test]
fn diamond_identity_vs_z() {
    let i = Unitary::identity(2).unwrap();
    let z = haarsep::linalg::gates::z();
    assert!((hull_distance_brute(&[(1.0, 0.0), (-1.0, 0.0)])).abs() < 1e-12);
    assert!((diamond_distance_unitary(&i, &z).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn sampled_hadamard_is_binomial() {
    let mut c = QuantumCircuit::new(1, 0).unwrap();
    c.h(0).unwrap().measure(&[0]).unwrap();
    let mut rng = seeds::rng(3);
    let p = run_circuit_sampled(&c, &StateVector::zero(1).unwrap(), &NoOracle, 100_000, &mut rng).unwrap();
    // Binomial std at 10^5 shots is 0.0016, so 0.01 is over six sigma.
    assert!((p - 0.5).abs() < 0.01, "{p}");
}

fn random_circuit(rng: &mut impl Rng) -> QuantumCircuit {
    let mut c = QuantumCircuit::new(3, rng.random_range(0..3)).unwrap();
    for _ in 0..rng.random_range(2..8) {
        match rng.random_range(0..4) {
            0 => {
                c.h(rng.random_range(0..3)).unwrap();
            }
            1 => {
                let a = rng.random_range(0..3);
                let b = (a + rng.random_range(1..3)) % 3;
                c.cnot(a, b).unwrap();
            }
            2 => {
                let u = sample_haar_unitary(2, rng).unwrap();
                c.apply(u, &[rng.random_range(0..3)]).unwrap();
            }
            _ => {
                c.measure(&[rng.random_range(0..3)]).unwrap();
            }
        }
    }
    c
}

#[test]
fn sampled_agrees_with_exact_on_random_circuits() {
    let mut rng = seeds::rng(21);
    for _ in 0..20 {
        let c = random_circuit(&mut rng);
        let input = StateVector::zero(3).unwrap();
        let exact = run_circuit_exact(&c, &input, &NoOracle).unwrap();
        let sampled = run_circuit_sampled(&c, &input, &NoOracle, 100_000, &mut rng).unwrap();
        assert!((exact - sampled).abs() < 0.01, "{exact} vs {sampled}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_preserve_norm(seed in any::<u64>(), qubits in 1usize..=4) {
        let mut rng = seeds::rng(seed);
        let dim = 1 << qubits;
        let u = sample_haar_unitary(dim, &mut rng).unwrap();
        let psi = random_state(dim, &mut rng);
        let out = apply_unitary(&u, &psi).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trace_distance_is_a_metric(seed in any::<u64>(), qubits in 1usize..=3) {
        let mut rng = seeds::rng(seed);
        let dim = 1 << qubits;
        let (a, b, c) = (random_density(dim, &mut rng), random_density(dim, &mut rng), random_density(dim, &mut rng));
        let ab = trace_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, trace_distance(&b, &a).unwrap());
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-9);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&ab));
        let ac = trace_distance(&a, &c).unwrap();
        let cb = trace_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn diamond_matches_hull_oracle(seed in any::<u64>(), qubits in 1usize..=3) {
        let mut rng = seeds::rng(seed);
        let dim = 1 << qubits;
        let u = sample_haar_unitary(dim, &mut rng).unwrap();
        // Mix in near-identity pairs so the hull often misses the origin.
        let v = if rng.random::<bool>() {
            sample_haar_unitary(dim, &mut rng).unwrap()
        } else {
            let small = haarsep::linalg::gates::ry(rng.random_range(-0.5..0.5));
            let mut c = QuantumCircuit::new(qubits, 0).unwrap();
            c.apply(small, &[0]).unwrap();
            haarsep::linalg::circuit_unitary(&c, &NoOracle).unwrap().mul(&u).unwrap()
        };
        let d = diamond_distance_unitary(&u, &v).unwrap();
        prop_assert!((d - diamond_oracle(&u, &v)).abs() < 1e-6, "{} vs {}", d, diamond_oracle(&u, &v));
        prop_assert!((d - diamond_distance_unitary(&v, &u).unwrap()).abs() < 1e-9);
        let phase = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        prop_assert!(diamond_distance_unitary(&u, &u.scaled_by_phase(phase)).unwrap() < 1e-6);
    }

    #[test]
    fn output_trace_distance_below_diamond(seed in any::<u64>()) {
        let mut rng = seeds::rng(seed);
        let u = sample_haar_unitary(4, &mut rng).unwrap();
        let v = sample_haar_unitary(4, &mut rng).unwrap();
        let d = diamond_distance_unitary(&u, &v).unwrap();
        for _ in 0..100 {
            let rho = random_density(4, &mut rng);
            let td = trace_distance(&u.conjugate(&rho).unwrap(), &v.conjugate(&rho).unwrap()).unwrap();
            prop_assert!(td <= d + 1e-8);
        }
    }
}

