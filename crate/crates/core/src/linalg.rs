//! Dense complex linear algebra helpers.
//!
//! Everything in this crate works on small dense matrices (n ≤ 64), so
//! `nalgebra` dynamic matrices over `Complex64` are used throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

/// Complex zero.
pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Complex one.
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
/// Imaginary unit.
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Real scalar promoted to a complex value.
pub fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Max-norm (largest entry modulus) of a matrix.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm of a vector.
pub fn max_norm_vec(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Commutator [a, b] = ab - ba.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() || !b.is_square() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    Ok(a * b - b * a)
}

/// Anticommutator {a, b} = ab + ba.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Hermiticity residual ‖m - m†‖_max.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_norm(&(m - m.adjoint()))
}

/// Matrix exponential (scaling-and-squaring Padé).
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Unitary time-evolution operator exp(-i H t / hbar) for hermitian `h`.
pub fn evolution_operator(h: &CMatrix, t: f64, hbar: f64) -> CMatrix {
    expm(&(h * (-C_I * cr(t / hbar))))
}

/// Kronecker product, used by the small chain oracle.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Trace as a complex number.
pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// Hilbert-Schmidt inner product tr(a† b).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    (a.adjoint() * b).trace()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO])
    }

    fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C_ZERO, -C_I, C_I, C_ZERO])
    }

    fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, -C_ONE])
    }

    #[test]
    fn commutator_of_paulis() {
        // [sigma_x, sigma_y] = 2i sigma_z
        let c = commutator(&pauli_x(), &pauli_y()).unwrap();
        let expected = pauli_z() * (cr(2.0) * C_I);
        assert!(max_norm(&(c - expected)) < 1e-14);
    }

    #[test]
    fn self_commutator_vanishes() {
        let a = pauli_x();
        let c = commutator(&a, &a).unwrap();
        assert!(max_norm(&c) < 1e-15);
    }

    #[test]
    fn commutator_rejects_mismatch() {
        let a = pauli_x();
        let b = CMatrix::identity(3, 3);
        assert!(commutator(&a, &b).is_err());
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = CMatrix::zeros(3, 3);
        assert!(max_norm(&(expm(&z) - CMatrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn expm_rotation() {
        // exp(i (pi/2) sigma_x) = i sigma_x
        let m = pauli_x() * (C_I * cr(std::f64::consts::FRAC_PI_2));
        let e = expm(&m);
        let expected = pauli_x() * C_I;
        assert!(max_norm(&(e - expected)) < 1e-12);
    }

    #[test]
    fn evolution_is_unitary() {
        let h = pauli_z() + pauli_x() * cr(0.7);
        let u = evolution_operator(&h, 2.3, 1.0);
        let res = max_norm(&(&u * u.adjoint() - CMatrix::identity(2, 2)));
        assert!(res < 1e-12, "unitarity residual {res:.3e}");
    }

    #[test]
    fn kron_dimensions() {
        let a = CMatrix::identity(2, 2);
        let b = pauli_x();
        let k = kron(&a, &b);
        assert_eq!(k.nrows(), 4);
        assert!((k[(0, 1)] - C_ONE).norm() < 1e-15);
        assert!((k[(2, 3)] - C_ONE).norm() < 1e-15);
    }
}
