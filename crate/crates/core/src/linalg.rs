//! Closed-form 3×3 determinant and adjugate, shared by exact and floating paths.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::form_oracle::{mat3_from_fn, Coefficient, Mat3};

pub fn det3<C: Coefficient>(m: &Mat3<C>) -> C {
    let t = |a: usize, b: usize, c: usize| m[0][a].clone() * m[1][b].clone() * m[2][c].clone();
    t(0, 1, 2) + t(1, 2, 0) + t(2, 0, 1) - t(0, 2, 1) - t(1, 0, 2) - t(2, 1, 0)
}

/// Adjugate: `adj(m)·m = m·adj(m) = det(m)·I`.
pub fn adj3<C: Coefficient>(m: &Mat3<C>) -> Mat3<C> {
    mat3_from_fn(|r, c| {
        // (r, c) entry of the adjugate is the (c, r) cofactor
        let (i0, i1) = others(c);
        let (j0, j1) = others(r);
        let minor = m[i0][j0].clone() * m[i1][j1].clone() - m[i0][j1].clone() * m[i1][j0].clone();
        if (r + c) % 2 == 0 {
            minor
        } else {
            -minor
        }
    })
}

fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

pub fn to_array(m: &Matrix3<Complex64>) -> Mat3<Complex64> {
    mat3_from_fn(|r, c| m[(r, c)])
}

pub fn from_array(a: &Mat3<Complex64>) -> Matrix3<Complex64> {
    Matrix3::from_fn(|r, c| a[r][c])
}

pub fn det(m: &Matrix3<Complex64>) -> Complex64 {
    det3(&to_array(m))
}

pub fn adjugate(m: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    from_array(&adj3(&to_array(m)))
}

/// Product of two 3×3 complex matrices, written out for the pointwise hot loops.
#[inline]
pub fn mul3(a: &Matrix3<Complex64>, b: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    Matrix3::from_fn(|r, c| a[(r, 0)] * b[(0, c)] + a[(r, 1)] * b[(1, c)] + a[(r, 2)] * b[(2, c)])
}

/// `tr(a b)` without forming the product.
#[inline]
pub fn trace_mul(a: &Matrix3<Complex64>, b: &Matrix3<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..3 {
        for c in 0..3 {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// Frobenius norm.
pub fn frob(m: &Matrix3<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real Frobenius pairing `Re tr(a^H b)`.
pub fn frob_dot(a: &Matrix3<Complex64>, b: &Matrix3<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Eigenvalues of a Hermitian matrix (Hermitian part is used), ascending.
pub fn hermitian_eigenvalues(m: &Matrix3<Complex64>) -> [f64; 3] {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigenvalues();
    let mut v = [eig[0], eig[1], eig[2]];
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn hermitian_part(m: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn hermiticity_defect(m: &Matrix3<Complex64>) -> f64 {
    frob(&(m - m.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_times_matrix_is_det() {
        let m = Matrix3::from_fn(|r, c| Complex64::new((r * 3 + c) as f64 + 0.5, (r as f64) - (c as f64) * 0.3));
        let a = adjugate(&m);
        let d = det(&m);
        let prod = a * m;
        let want = Matrix3::identity() * d;
        assert!(frob(&(prod - want)) < 1e-12);
    }
}
