//! Fixed single- and two-qubit gates.

use super::{Unitary, C64};
use nalgebra::DMatrix;

fn from_rows(dim: usize, entries: &[C64]) -> Unitary {
    Unitary::new_unchecked(DMatrix::from_row_slice(dim, dim, entries))
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn x() -> Unitary {
    from_rows(2, &[ZERO, ONE, ONE, ZERO])
}

pub fn y() -> Unitary {
    from_rows(2, &[ZERO, -I, I, ZERO])
}

pub fn z() -> Unitary {
    from_rows(2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn h() -> Unitary {
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    from_rows(2, &[r, r, r, -r])
}

pub fn s() -> Unitary {
    from_rows(2, &[ONE, ZERO, ZERO, I])
}

pub fn s_dagger() -> Unitary {
    from_rows(2, &[ONE, ZERO, ZERO, -I])
}

pub fn phase(theta: f64) -> Unitary {
    from_rows(2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, theta)])
}

pub fn ry(theta: f64) -> Unitary {
    let (s, c) = (theta / 2.0).sin_cos();
    from_rows(2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)])
}

/// Exchanges the two wires it is applied to.
pub fn swap() -> Unitary {
    from_rows(
        4,
        &[
            ONE, ZERO, ZERO, ZERO, //
            ZERO, ZERO, ONE, ZERO, //
            ZERO, ONE, ZERO, ZERO, //
            ZERO, ZERO, ZERO, ONE,
        ],
    )
}

/// Rotation taking the eigenbasis of a Pauli axis to the computational basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// Unitary applied before a computational-basis readout so the readout
    /// measures this axis (outcome 0 ↔ eigenvalue +1).
    pub fn readout_rotation(self) -> Unitary {
        match self {
            PauliAxis::X => h(),
            PauliAxis::Y => h().mul(&s_dagger()).expect("2x2"),
            PauliAxis::Z => Unitary::identity(2).expect("2x2"),
        }
    }

    pub fn eigenprojector(self, outcome: usize) -> DMatrix<C64> {
        let rot = self.readout_rotation();
        let v = rot.adjoint().column(outcome);
        let a = v.amplitudes();
        a * a.adjoint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gates_are_unitary() {
        for g in [x(), y(), z(), h(), s(), s_dagger(), phase(0.4), ry(1.1), swap()] {
            assert!(g.deviation_from_unitary() < 1e-14);
        }
    }

    #[test]
    fn readout_rotations_diagonalise_their_axis() {
        let pauli = [(PauliAxis::X, x()), (PauliAxis::Y, y()), (PauliAxis::Z, z())];
        for (axis, p) in pauli {
            let r = axis.readout_rotation();
            let d = r.matrix() * p.matrix() * r.matrix().adjoint();
            assert!((d[(0, 0)] - ONE).norm() < 1e-12, "{axis:?}");
            assert!((d[(1, 1)] + ONE).norm() < 1e-12, "{axis:?}");
            assert!(d[(0, 1)].norm() < 1e-12);
        }
    }
}
