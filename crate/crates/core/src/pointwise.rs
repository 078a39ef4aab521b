//! Pointwise Hermitian algebra on a 3-fold: the Ψ ↔ ω correspondence, the Hodge
//! star on (2,2)-forms, the metric pairing on (1,1)-forms, the modified star and
//! the Λ contraction.
//!
//! Matrix layouts follow [`crate::form_oracle`]: `Herm3[k][j] = ω_{k̄j}` and
//! `Psi22[k][j] = Ψ^{kj̄}`. With those layouts `ω∧ω` has component matrix
//! `adj(ω)`, which is what makes every formula here a plain matrix expression.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use crate::error::{AnomalyError, Result};
use crate::form_oracle::{self, mat3_from_fn};
use crate::linalg::{self, adjugate, det, from_array, to_array};

/// Relative eigenvalue floor for positivity checks.
pub const POSITIVITY_EPS: f64 = 1e-12;
/// Largest accepted condition number.
pub const CONDITION_LIMIT: f64 = 1e12;

fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

macro_rules! matrix_newtype {
    ($name:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq)]
        pub struct $name(pub Matrix3<Complex64>);

        impl $name {
            pub fn zero() -> Self {
                Self(Matrix3::zeros())
            }

            pub fn identity() -> Self {
                Self(Matrix3::identity())
            }

            pub fn from_diag(d: [f64; 3]) -> Self {
                Self(Matrix3::from_diagonal(&nalgebra::Vector3::new(
                    cplx(d[0]),
                    cplx(d[1]),
                    cplx(d[2]),
                )))
            }

            /// Single entry `E_{rc}` (0-based).
            pub fn unit(r: usize, c: usize) -> Self {
                let mut m = Matrix3::zeros();
                m[(r, c)] = cplx(1.0);
                Self(m)
            }

            pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(f: F) -> Self {
                Self(Matrix3::from_fn(f))
            }

            pub fn get(&self, r: usize, c: usize) -> Complex64 {
                self.0[(r, c)]
            }

            pub fn scale(&self, s: f64) -> Self {
                Self(self.0 * cplx(s))
            }

            pub fn norm(&self) -> f64 {
                linalg::frob(&self.0)
            }

            pub fn is_hermitian(&self, tol: f64) -> bool {
                linalg::hermiticity_defect(&self.0) <= tol * (1.0 + self.norm())
            }

            pub fn eigenvalues(&self) -> [f64; 3] {
                linalg::hermitian_eigenvalues(&self.0)
            }

            pub fn to_array(&self) -> form_oracle::Mat3<Complex64> {
                to_array(&self.0)
            }

            pub fn from_array(a: &form_oracle::Mat3<Complex64>) -> Self {
                Self(from_array(a))
            }
        }

        impl std::ops::Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                Self(self.0 + rhs.0)
            }
        }

        impl std::ops::Sub for $name {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                Self(self.0 - rhs.0)
            }
        }
    };
}

matrix_newtype!(Herm3);
matrix_newtype!(Psi22);

/// Pointwise modulus `|Ω|` of the holomorphic volume form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeData {
    abs_omega: f64,
}

impl VolumeData {
    pub fn new(abs_omega: f64) -> Result<Self> {
        if !(abs_omega > 0.0 && abs_omega.is_finite()) {
            return Err(AnomalyError::Domain(format!("|Ω| must be positive, got {abs_omega}")));
        }
        Ok(Self { abs_omega })
    }

    pub fn unit() -> Self {
        Self { abs_omega: 1.0 }
    }

    pub fn abs_omega(&self) -> f64 {
        self.abs_omega
    }
}

/// Endomorphism of a rank-r bundle: `H`, `δH` or `ΛF`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermEndE(pub DMatrix<Complex64>);

impl HermEndE {
    pub fn rank(&self) -> usize {
        self.0.nrows()
    }

    pub fn identity(r: usize) -> Self {
        Self(DMatrix::identity(r, r))
    }

    pub fn zeros(r: usize) -> Self {
        Self(DMatrix::zeros(r, r))
    }
}

/// Endomorphism-valued (1,1)-form, `entries[k][j] = F_{k̄j}` (an r×r matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct EndCurv {
    pub entries: [[DMatrix<Complex64>; 3]; 3],
}

impl EndCurv {
    pub fn zeros(r: usize) -> Self {
        Self {
            entries: std::array::from_fn(|_| std::array::from_fn(|_| DMatrix::zeros(r, r))),
        }
    }

    pub fn rank(&self) -> usize {
        self.entries[0][0].nrows()
    }
}

/// Checks Hermitian positive definiteness with the crate thresholds.
/// Returns the eigenvalues on success.
pub fn check_positive(m: &Matrix3<Complex64>, what: &str) -> Result<[f64; 3]> {
    let ev = linalg::hermitian_eigenvalues(m);
    let trace: f64 = ev.iter().sum();
    if !ev.iter().all(|v| v.is_finite()) {
        return Err(AnomalyError::Domain(format!("{what} has non-finite entries")));
    }
    if ev[0] <= 0.0 {
        return Err(AnomalyError::Domain(format!(
            "{what} is not positive definite (eigenvalues {:.3e}, {:.3e}, {:.3e})",
            ev[0], ev[1], ev[2]
        )));
    }
    let condition = ev[2] / ev[0];
    if condition > CONDITION_LIMIT {
        return Err(AnomalyError::Conditioning { condition, limit: CONDITION_LIMIT });
    }
    if ev[0] <= POSITIVITY_EPS * trace {
        return Err(AnomalyError::Domain(format!("{what} is numerically singular")));
    }
    Ok(ev)
}

fn inverse_unchecked(m: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    adjugate(m) / det(m)
}

/// Unique positive ω with ω∧ω = Ψ.
pub fn root22(psi: &Psi22) -> Result<Herm3> {
    check_positive(&psi.0, "Ψ")?;
    Ok(root22_unchecked(psi))
}

pub(crate) fn root22_unchecked(psi: &Psi22) -> Herm3 {
    // det ω = (det Ψ)^{1/2}, ω = det ω · Ψ^{-1} = adj Ψ / (det Ψ)^{1/2}
    let d = det(&psi.0).re;
    Herm3(linalg::hermitian_part(&adjugate(&psi.0)) / cplx(d.sqrt()))
}

/// `‖Ω‖_ω = |Ω| det(ω)^{-1/2}`.
pub fn norm_omega(omega: &Herm3, vol: &VolumeData) -> Result<f64> {
    check_positive(&omega.0, "ω")?;
    Ok(norm_omega_unchecked(omega, vol))
}

pub(crate) fn norm_omega_unchecked(omega: &Herm3, vol: &VolumeData) -> f64 {
    vol.abs_omega / det(&omega.0).re.sqrt()
}

/// `Ψ = ‖Ω‖_ω ω²`.
pub fn psi_from_omega(omega: &Herm3, vol: &VolumeData) -> Result<Psi22> {
    check_positive(&omega.0, "ω")?;
    Ok(psi_from_omega_unchecked(omega, vol))
}

pub(crate) fn psi_from_omega_unchecked(omega: &Herm3, vol: &VolumeData) -> Psi22 {
    let n = norm_omega_unchecked(omega, vol);
    Psi22(linalg::hermitian_part(&adjugate(&omega.0)) * cplx(n))
}

/// Inverse of [`psi_from_omega`]: `ω = (det Ψ / |Ω|²) Ψ^{-1}`, together with `‖Ω‖_ω`.
pub fn omega_from_psi(psi: &Psi22, vol: &VolumeData) -> Result<(Herm3, f64)> {
    check_positive(&psi.0, "Ψ")?;
    let (omega, n) = omega_from_psi_unchecked(psi, vol);
    check_positive(&omega.0, "ω")?;
    Ok((omega, n))
}

pub(crate) fn omega_from_psi_unchecked(psi: &Psi22, vol: &VolumeData) -> (Herm3, f64) {
    // det Ψ · Ψ^{-1} = adj Ψ
    let a2 = vol.abs_omega * vol.abs_omega;
    let omega = Herm3(linalg::hermitian_part(&adjugate(&psi.0)) / cplx(a2));
    let n = norm_omega_unchecked(&omega, vol);
    (omega, n)
}

/// Hodge star of a (2,2)-form with respect to `metric`:
/// `⋆Ψ = (2 / det ω̃) · ω̃ Ψ ω̃` in the crate layouts.
pub fn hodge_star22(psi: &Psi22, metric: &Herm3) -> Result<Herm3> {
    check_positive(&metric.0, "ω̃")?;
    Ok(hodge_star22_unchecked(psi, metric))
}

pub(crate) fn hodge_star22_unchecked(psi: &Psi22, metric: &Herm3) -> Herm3 {
    let d = det(&metric.0).re;
    Herm3(metric.0 * psi.0 * metric.0 * cplx(2.0 / d))
}

/// Metric pairing `⟨φ, ψ⟩_ω`, linear in `φ`, conjugate-linear in `ψ`.
pub fn inner11(phi: &Herm3, psi: &Herm3, omega: &Herm3) -> Result<Complex64> {
    check_positive(&omega.0, "ω")?;
    Ok(inner11_unchecked(phi, psi, omega))
}

pub(crate) fn inner11_unchecked(phi: &Herm3, psi: &Herm3, omega: &Herm3) -> Complex64 {
    let inv = inverse_unchecked(&omega.0);
    let raised = inv * phi.0 * inv;
    raised.iter().zip(psi.0.iter()).map(|(a, b)| a * b.conj()).sum()
}

/// `⋆̃δΨ = (⟨⋆δΨ, ω⟩ ω − ⋆δΨ) / (2‖Ω‖_ω)`.
pub fn tilde_star(dpsi: &Psi22, omega: &Herm3, vol: &VolumeData) -> Result<Herm3> {
    check_positive(&omega.0, "ω")?;
    Ok(tilde_star_unchecked(dpsi, omega, vol))
}

pub(crate) fn tilde_star_unchecked(dpsi: &Psi22, omega: &Herm3, vol: &VolumeData) -> Herm3 {
    let n = norm_omega_unchecked(omega, vol);
    let star = hodge_star22_unchecked(dpsi, omega);
    let trace = inner11_unchecked(&star, omega, omega);
    Herm3((omega.0 * trace - star.0) / cplx(2.0 * n))
}

/// Variation of ω written in components:
/// `δω = (tr(ω δΨ) ω − ω δΨ ω) / (‖Ω‖_ω det ω)`.
pub fn delta_omega_components(omega: &Herm3, vol: &VolumeData, dpsi: &Psi22) -> Result<Herm3> {
    check_positive(&omega.0, "ω")?;
    let n = norm_omega_unchecked(omega, vol);
    let d = det(&omega.0).re;
    let t = (omega.0 * dpsi.0).trace();
    Ok(Herm3((omega.0 * t - omega.0 * dpsi.0 * omega.0) / cplx(n * d)))
}

/// Residual of the first-order expansion `ω(Ψ + hδΨ) ≈ ω(Ψ) + h ⋆̃δΨ`,
/// measured in Frobenius norm.
pub fn variation_consistency(omega: &Herm3, vol: &VolumeData, dpsi: &Psi22, h: f64) -> Result<f64> {
    let psi = psi_from_omega(omega, vol)?;
    let base = omega_from_psi(&psi, vol)?.0;
    let moved = omega_from_psi(&(psi + dpsi.scale(h)), vol)?.0;
    let fd = (moved.0 - base.0) / cplx(h);
    let analytic = tilde_star_unchecked(dpsi, omega, vol);
    Ok(linalg::frob(&(fd - analytic.0)))
}

/// `(ΛF) = ω^{jk̄} F_{k̄j}`.
pub fn lambda_contract(f: &EndCurv, omega: &Herm3) -> Result<HermEndE> {
    check_positive(&omega.0, "ω")?;
    let inv = inverse_unchecked(&omega.0);
    let r = f.rank();
    let mut out = DMatrix::zeros(r, r);
    for k in 0..3 {
        for j in 0..3 {
            out += &f.entries[k][j] * inv[(j, k)];
        }
    }
    Ok(HermEndE(out))
}

/// Component tables of `from_form11(E_ab) ∧ from_form11(E_cd)`, computed once with
/// the exterior-algebra oracle. Entry `[a][b][c][d]` is a (2,2) component matrix.
pub(crate) fn wedge11_table() -> &'static Vec<Vec<Matrix3<Complex64>>> {
    static TABLE: OnceLock<Vec<Vec<Matrix3<Complex64>>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let unit = |p: usize| -> form_oracle::Mat3<Complex64> {
            mat3_from_fn(|r, c| if r * 3 + c == p { cplx(1.0) } else { cplx(0.0) })
        };
        (0..9)
            .map(|p| {
                let fp = form_oracle::from_form11(&unit(p));
                (0..9)
                    .map(|q| {
                        let fq = form_oracle::from_form11(&unit(q));
                        let m = form_oracle::to_form22(&fp.wedge(&fq)).expect("(1,1)∧(1,1) is (2,2)");
                        from_array(&m)
                    })
                    .collect()
            })
            .collect()
    })
}

/// Nonzero entries of [`wedge11_table`], grouped by the pair `(p, q)` of unit forms.
pub(crate) fn wedge11_sparse() -> &'static Vec<(usize, usize, Vec<(usize, Complex64)>)> {
    static SPARSE: OnceLock<Vec<(usize, usize, Vec<(usize, Complex64)>)>> = OnceLock::new();
    SPARSE.get_or_init(|| {
        let table = wedge11_table();
        let mut out = Vec::new();
        for p in 0..9 {
            for q in 0..9 {
                let terms: Vec<(usize, Complex64)> =
                    (0..9).map(|o| (o, table[p][q][(o / 3, o % 3)])).filter(|(_, c)| c.norm_sqr() > 0.0).collect();
                if !terms.is_empty() {
                    out.push((p, q, terms));
                }
            }
        }
        out
    })
}

/// Component matrix of the (2,2)-form `φ ∧ χ` for (1,1)-forms given by matrices.
pub fn wedge11(phi: &Matrix3<Complex64>, chi: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    let table = wedge11_table();
    let mut out = Matrix3::zeros();
    for p in 0..9 {
        let a = phi[(p / 3, p % 3)];
        if a.re == 0.0 && a.im == 0.0 {
            continue;
        }
        for q in 0..9 {
            let b = chi[(q / 3, q % 3)];
            if b.re == 0.0 && b.im == 0.0 {
                continue;
            }
            let t = &table[p][q];
            let ab = a * b;
            for (o, v) in out.iter_mut().zip(t.iter()) {
                if v.re != 0.0 || v.im != 0.0 {
                    *o += ab * v;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Matrix3<Complex64>, b: &Matrix3<Complex64>, tol: f64) -> bool {
        linalg::frob(&(a - b)) <= tol
    }

    #[test]
    fn root22_examples() {
        let w = root22(&Psi22::identity()).unwrap();
        assert!(close(&w.0, &Matrix3::identity(), 1e-15));
        let w = root22(&Psi22::from_diag([6.0, 3.0, 2.0])).unwrap();
        assert!(close(&w.0, &Herm3::from_diag([1.0, 2.0, 3.0]).0, 1e-14));
    }

    #[test]
    fn root22_rejects_indefinite_and_singular() {
        let bad = Psi22::from_diag([1.0, -1.0, 2.0]);
        assert!(matches!(root22(&bad), Err(AnomalyError::Domain(_))));
        let thin = Psi22::from_diag([1.0, 1.0, 1e-13]);
        assert!(matches!(root22(&thin), Err(AnomalyError::Conditioning { .. })));
        assert!(root22(&Psi22::from_diag([1.0, 1.0, 1e-11])).is_ok());
    }

    #[test]
    fn norm_examples() {
        let v = VolumeData::unit();
        assert_eq!(norm_omega(&Herm3::identity(), &v).unwrap(), 1.0);
        assert!((norm_omega(&Herm3::identity().scale(4.0), &v).unwrap() - 0.125).abs() < 1e-15);
        assert!(VolumeData::new(0.0).is_err());
    }

    #[test]
    fn psi_omega_examples() {
        let v = VolumeData::unit();
        let p = psi_from_omega(&Herm3::identity().scale(16.0), &v).unwrap();
        assert!(close(&p.0, &Psi22::identity().scale(4.0).0, 1e-13));
        let (w, n) = omega_from_psi(&Psi22::identity().scale(4.0), &v).unwrap();
        assert!(close(&w.0, &Herm3::identity().scale(16.0).0, 1e-13));
        assert!((n - 1.0 / 64.0).abs() < 1e-16);
        let (w, n) = omega_from_psi(&Psi22::identity(), &v).unwrap();
        assert!(close(&w.0, &Matrix3::identity(), 1e-15));
        assert_eq!(n, 1.0);
    }

    #[test]
    fn star_examples() {
        let id = Herm3::identity();
        let s = hodge_star22(&Psi22::identity(), &id).unwrap();
        assert!(close(&s.0, &Herm3::identity().scale(2.0).0, 1e-15));
        let s = hodge_star22(&Psi22::from_diag([1.0, 5.0, -2.0]), &id).unwrap();
        assert!(close(&s.0, &Herm3::from_diag([2.0, 10.0, -4.0]).0, 1e-15));
    }

    #[test]
    fn inner_examples() {
        let w = Herm3::from_diag([1.0, 2.0, 7.0]);
        let v = inner11(&w, &w, &w).unwrap();
        assert!((v - cplx(3.0)).norm() < 1e-14);
        let v = inner11(&Herm3::unit(0, 0), &Herm3::unit(1, 1), &Herm3::identity()).unwrap();
        assert_eq!(v, cplx(0.0));
    }

    #[test]
    fn tilde_star_examples() {
        let v = VolumeData::unit();
        let id = Herm3::identity();
        assert_eq!(tilde_star(&Psi22::zero(), &id, &v).unwrap(), Herm3::zero());
        let t = tilde_star(&Psi22::unit(0, 0), &id, &v).unwrap();
        assert!(close(&t.0, &Herm3::from_diag([0.0, 1.0, 1.0]).0, 1e-15));
    }

    #[test]
    fn variation_zero_direction() {
        let r = variation_consistency(&Herm3::identity(), &VolumeData::unit(), &Psi22::zero(), 1e-5).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn variation_halves_with_h() {
        let v = VolumeData::unit();
        let d = Psi22::unit(0, 0);
        let r1 = variation_consistency(&Herm3::identity(), &v, &d, 1e-5).unwrap();
        let r2 = variation_consistency(&Herm3::identity(), &v, &d, 5e-6).unwrap();
        assert!(r1 < 1e-4);
        // rank-one δΨ: adj is exactly linear along it, only rounding remains
        assert!(r2 <= 0.5 * r1 + 1e-10, "{r1} {r2}");

        let d = Psi22::from_fn(|r, c| {
            if r == c {
                cplx((r + 1) as f64)
            } else {
                Complex64::new(0.0, 0.3 * (r as f64 - c as f64))
            }
        });
        let w = Herm3::from_diag([1.0, 2.0, 0.7]);
        let r1 = variation_consistency(&w, &v, &d, 1e-5).unwrap();
        let r2 = variation_consistency(&w, &v, &d, 5e-6).unwrap();
        assert!(r1 < 1e-4);
        assert!((r2 / r1 - 0.5).abs() < 0.01, "{r1} {r2}");
    }

    #[test]
    fn lambda_examples() {
        let id = Herm3::identity();
        assert_eq!(lambda_contract(&EndCurv::zeros(2), &id).unwrap(), HermEndE::zeros(2));
        let m = DMatrix::from_fn(2, 2, |r, c| Complex64::new((r + 2 * c) as f64, r as f64));
        let mut f = EndCurv::zeros(2);
        for k in 0..3 {
            f.entries[k][k] = m.clone();
        }
        let l = lambda_contract(&f, &id).unwrap();
        assert!((l.0 - &m * cplx(3.0)).norm() < 1e-14);
        let w = Herm3::from_diag([2.0, 4.0, 8.0]);
        let l = lambda_contract(&f, &w).unwrap();
        assert!((l.0 - &m * cplx(0.5 + 0.25 + 0.125)).norm() < 1e-14);
    }

    #[test]
    fn wedge_table_matches_identity_square() {
        let p = wedge11(&Matrix3::identity(), &Matrix3::identity());
        assert!(close(&p, &Matrix3::identity(), 1e-15));
    }
}
