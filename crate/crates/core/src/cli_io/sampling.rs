//! Seeded random inputs for the verification suites.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::form_oracle::{gauss, mat3_from_fn, GaussRational, Mat3};
use crate::linalg::{adjugate, det};
use crate::linearize::{CurvTensor, Covector};
use crate::pointwise::{EndCurv, Herm3, HermEndE, Psi22, VolumeData};

pub type SuiteRng = ChaCha8Rng;

/// Independent stream for suite `tag` under `seed`.
pub fn suite_rng(seed: u64, tag: u64) -> SuiteRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

fn normal(rng: &mut SuiteRng) -> f64 {
    rng.sample(StandardNormal)
}

fn cnormal(rng: &mut SuiteRng) -> Complex64 {
    Complex64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_matrix(rng: &mut SuiteRng) -> Matrix3<Complex64> {
    Matrix3::from_fn(|_, _| cnormal(rng))
}

/// `A Aᴴ + s I` with `A` complex Gaussian; `s ∈ [0.3, 1.3)` keeps the condition number moderate.
pub fn positive_herm(rng: &mut SuiteRng) -> Herm3 {
    let a = gaussian_matrix(rng);
    let shift = 0.3 + rng.gen::<f64>();
    Herm3(a * a.adjoint() + Matrix3::identity() * Complex64::new(shift, 0.0))
}

pub fn positive_psi(rng: &mut SuiteRng) -> Psi22 {
    Psi22(positive_herm(rng).0)
}

/// Hermitian matrix with Gaussian entries (not sign-definite).
pub fn herm_matrix(rng: &mut SuiteRng) -> Matrix3<Complex64> {
    let a = gaussian_matrix(rng);
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn volume(rng: &mut SuiteRng) -> VolumeData {
    VolumeData::new(0.5 + rng.gen::<f64>()).expect("positive volume")
}

pub fn covector(rng: &mut SuiteRng) -> Covector {
    loop {
        let xi = Covector::new([cnormal(rng), cnormal(rng), cnormal(rng)]);
        if xi.0.norm() > 1e-3 {
            return xi;
        }
    }
}

fn small_rational(rng: &mut SuiteRng) -> (i64, i64) {
    (rng.gen_range(-9..=9), rng.gen_range(1..=7))
}

/// Hermitian matrix with Gaussian-rational entries.
pub fn gauss_rational_herm(rng: &mut SuiteRng) -> Mat3<GaussRational> {
    let mut m: Mat3<GaussRational> = mat3_from_fn(|_, _| gauss(0, 1, 0, 1));
    for r in 0..3 {
        let (n, d) = small_rational(rng);
        m[r][r] = gauss(n, d, 0, 1);
        for c in r + 1..3 {
            let (rn, rd) = small_rational(rng);
            let (in_, id) = small_rational(rng);
            m[r][c] = gauss(rn, rd, in_, id);
            m[c][r] = gauss(rn, rd, -in_, id);
        }
    }
    m
}

/// Curvature satisfying the reality condition with respect to `omega`,
/// Frobenius norm `scale` in lowered form.
pub fn real_curvature(rng: &mut SuiteRng, omega: &Herm3, scale: f64) -> CurvTensor {
    let mut lowered = [[Matrix3::<Complex64>::zeros(); 3]; 3];
    for k in 0..3 {
        lowered[k][k] = herm_matrix(rng);
        for j in k + 1..3 {
            let m = gaussian_matrix(rng);
            lowered[k][j] = m;
            lowered[j][k] = m.adjoint();
        }
    }
    let total: f64 = lowered.iter().flatten().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    let inv = adjugate(&omega.0) / det(&omega.0);
    let mut r = CurvTensor::zero();
    for k in 0..3 {
        for j in 0..3 {
            r.entries[k][j] = inv * lowered[k][j] * Complex64::new(scale / total, 0.0);
        }
    }
    r
}

fn dgaussian(rng: &mut SuiteRng, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| cnormal(rng))
}

pub fn positive_end(rng: &mut SuiteRng, rank: usize) -> HermEndE {
    let a = dgaussian(rng, rank);
    HermEndE(&a * a.adjoint() + DMatrix::identity(rank, rank) * Complex64::new(0.5, 0.0))
}

pub fn herm_end(rng: &mut SuiteRng, rank: usize) -> HermEndE {
    let a = dgaussian(rng, rank);
    HermEndE((&a + a.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Bundle curvature satisfying the reality condition with respect to `h`.
pub fn real_end_curvature(rng: &mut SuiteRng, h: &HermEndE) -> EndCurv {
    let rank = h.rank();
    let h_inv = h.0.clone().try_inverse().expect("positive H is invertible");
    let mut f = EndCurv::zeros(rank);
    for k in 0..3 {
        f.entries[k][k] = &h_inv * herm_end(rng, rank).0;
        for j in k + 1..3 {
            let g = dgaussian(rng, rank);
            f.entries[k][j] = &h_inv * &g;
            f.entries[j][k] = &h_inv * g.adjoint();
        }
    }
    f
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn unitary(rng: &mut SuiteRng) -> Matrix3<Complex64> {
    gaussian_matrix(rng).qr().q()
}

/// Hermitian direction of unit Frobenius norm.
pub fn unit_direction(rng: &mut SuiteRng) -> Psi22 {
    let m = herm_matrix(rng);
    Psi22(m / Complex64::new(m.norm(), 0.0))
}
