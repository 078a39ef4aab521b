//! Principal symbols of the linearized flow.
//!
//! The symbol of `Δ̃` at a (1,0)-covector ξ sends `δΨ` to
//! `iξ∧ξ̄∧(⋆̃δΨ − 2α′ Rm(⋆̃δΨ))`. Its image always lies in the kernel of the
//! d-symbol, `{δΨ Hermitian : ξ_j δΨ^{jk̄} = 0}`, a real 4-dimensional space, and
//! ellipticity on closed forms means every eigenvalue of the restriction has a
//! strictly positive real part. Eigenvalues are those of the realified 4×4 map.

use nalgebra::{DMatrix, Matrix3, Matrix4, Schur, Vector3};
use num_complex::Complex64;

use crate::error::{AnomalyError, Result};
use crate::linalg::{self, adjugate, det};
use crate::pointwise::{
    check_positive, norm_omega_unchecked, tilde_star_unchecked, wedge11, EndCurv, Herm3, HermEndE,
    Psi22, VolumeData,
};

/// Relative tolerance for "the symbol image lies in the d-symbol kernel".
pub const PROJECTION_TOL: f64 = 1e-10;

fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Chern curvature at a point, `entries[k][j][(p, q)] = R_{k̄j}{}^p{}_q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvTensor {
    pub entries: [[Matrix3<Complex64>; 3]; 3],
}

impl CurvTensor {
    pub fn zero() -> Self {
        Self { entries: [[Matrix3::zeros(); 3]; 3] }
    }

    /// `R_{k̄j}{}^p{}_q = λ δ_{kj} δ_{pq}`; with ω = I its Rm operator is `λ·tr(δω)·I`.
    pub fn trace_model(lambda: f64) -> Self {
        let mut r = Self::zero();
        for k in 0..3 {
            r.entries[k][k] = Matrix3::identity() * cplx(lambda);
        }
        r
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.entries.iter_mut() {
            for m in row.iter_mut() {
                *m *= cplx(s);
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().flatten().map(|m| linalg::frob(m).powi(2)).sum::<f64>().sqrt()
    }

    /// Defect of the reality condition: with the endomorphism index lowered by ω,
    /// `L_{k̄j} = ω R_{k̄j}` must satisfy `L_{j̄k} = L_{k̄j}^H`.
    pub fn reality_defect(&self, omega: &Herm3) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..3 {
            for j in 0..3 {
                let lkj = omega.0 * self.entries[k][j];
                let ljk = omega.0 * self.entries[j][k];
                worst = worst.max(linalg::frob(&(ljk - lkj.adjoint())));
            }
        }
        worst
    }

    /// Expression in the frame `z = A z'`: ω' = A^H ω A transforms alongside.
    pub fn change_frame(&self, a: &Matrix3<Complex64>) -> Self {
        let inv = adjugate(a) / det(a);
        let mut out = Self::zero();
        for b in 0..3 {
            for c in 0..3 {
                let mut acc = Matrix3::zeros();
                for k in 0..3 {
                    for j in 0..3 {
                        let w = a[(k, b)].conj() * a[(j, c)];
                        if w.norm_sqr() != 0.0 {
                            acc += self.entries[k][j] * w;
                        }
                    }
                }
                out.entries[b][c] = inv * acc * a;
            }
        }
        out
    }
}

/// Components `ξ_j` of a (1,0)-covector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covector(pub Vector3<Complex64>);

impl Covector {
    pub fn new(xi: [Complex64; 3]) -> Self {
        Self(Vector3::new(xi[0], xi[1], xi[2]))
    }

    pub fn real(x: [f64; 3]) -> Self {
        Self::new([cplx(x[0]), cplx(x[1]), cplx(x[2])])
    }

    pub fn basis(j: usize) -> Self {
        let mut v = [0.0; 3];
        v[j] = 1.0;
        Self::real(v)
    }

    /// `|ξ|²_ω = ω^{jk̄} ξ_j conj(ξ_k)`.
    pub fn norm_sq(&self, omega: &Herm3) -> f64 {
        let inv = adjugate(&omega.0) / det(&omega.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..3 {
            for k in 0..3 {
                acc += inv[(j, k)] * self.0[j] * self.0[k].conj();
            }
        }
        acc.re
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.norm_sqr() == 0.0)
    }

    /// Matrix `X` with `from_form11(X) = iξ∧ξ̄`, i.e. `X_{k̄j} = ξ_j conj(ξ_k)`.
    pub fn xi_xibar(&self) -> Matrix3<Complex64> {
        Matrix3::from_fn(|k, j| self.0[j] * self.0[k].conj())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolReport {
    pub eigenvalues: Vec<Complex64>,
    pub min_real_part: f64,
    pub elliptic: bool,
    pub kernel_dim: usize,
}

impl SymbolReport {
    fn from_eigenvalues(eigenvalues: Vec<Complex64>, kernel_dim: usize) -> Self {
        let min_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        Self {
            eigenvalues,
            min_real_part,
            // strict: a zero real part is not elliptic
            elliptic: min_real_part > 0.0,
            kernel_dim,
        }
    }
}

/// `Rm(δω)_{k̄j} = R_{k̄j}{}^{pq̄} δω_{q̄p}` with `R^{pq̄} = R^p{}_s ω^{sq̄}`.
pub fn rm_apply(r: &CurvTensor, domega: &Herm3, omega: &Herm3) -> Result<Herm3> {
    check_positive(&omega.0, "ω")?;
    Ok(rm_apply_unchecked(r, domega, omega))
}

pub(crate) fn rm_apply_unchecked(r: &CurvTensor, domega: &Herm3, omega: &Herm3) -> Herm3 {
    let inv = adjugate(&omega.0) / det(&omega.0);
    let raised = inv * domega.0;
    Herm3(Matrix3::from_fn(|k, j| (r.entries[k][j] * raised).trace()))
}

fn require_nonzero(xi: &Covector) -> Result<()> {
    if xi.is_zero() || !xi.0.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(AnomalyError::Degenerate("covector ξ must be nonzero".into()));
    }
    Ok(())
}

/// Frobenius-orthonormal real basis of `{δΨ Hermitian : ξ_j δΨ^{jk̄} = 0}`.
pub fn d_symbol_kernel(xi: &Covector) -> Result<Vec<Psi22>> {
    require_nonzero(xi)?;
    // ξ^T δΨ = 0 with δΨ Hermitian means δΨ annihilates conj(ξ).
    let v0 = xi.0.map(|z| z.conj()).normalize();
    let skip = (0..3)
        .max_by(|&a, &b| v0[a].norm_sqr().total_cmp(&v0[b].norm_sqr()))
        .unwrap_or(0);
    let mut frame: Vec<Vector3<Complex64>> = Vec::with_capacity(2);
    for i in (0..3).filter(|&i| i != skip) {
        let mut e = Vector3::zeros();
        e[i] = cplx(1.0);
        let mut v = e - v0 * v0.dotc(&e);
        for u in &frame {
            v -= u * u.dotc(&v);
        }
        frame.push(v.normalize());
    }
    let (u, v) = (frame[0], frame[1]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let outer = |a: &Vector3<Complex64>, b: &Vector3<Complex64>| a * b.adjoint();
    Ok(vec![
        Psi22(outer(&u, &u)),
        Psi22(outer(&v, &v)),
        Psi22((outer(&u, &v) + outer(&v, &u)) * cplx(s)),
        Psi22((outer(&u, &v) - outer(&v, &u)) * Complex64::new(0.0, s)),
    ])
}

/// `to_form22(iξ∧ξ̄∧φ)`.
pub fn wedge_xi_extract(xi: &Covector, phi: &Herm3) -> Psi22 {
    Psi22(wedge11(&xi.xi_xibar(), &phi.0))
}

/// Symbol of `Δ̃` applied to `δΨ`.
pub fn delta_tilde_symbol(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
    dpsi: &Psi22,
) -> Result<Psi22> {
    require_nonzero(xi)?;
    check_positive(&omega.0, "ω")?;
    Ok(delta_tilde_symbol_unchecked(xi, omega, vol, r, alpha, dpsi))
}

fn delta_tilde_symbol_unchecked(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
    dpsi: &Psi22,
) -> Psi22 {
    let t = tilde_star_unchecked(dpsi, omega, vol);
    let curv = rm_apply_unchecked(r, &t, omega);
    wedge_xi_extract(xi, &(t - curv.scale(2.0 * alpha)))
}

/// Coordinates of `images` in the orthonormal `basis`, failing when an image has a
/// component outside the span.
fn project(basis: &[Psi22], images: &[Psi22]) -> Result<DMatrix<f64>> {
    let scale = images.iter().map(|y| y.norm()).fold(0.0, f64::max);
    let n = basis.len();
    let mut m = DMatrix::zeros(n, images.len());
    for (b, y) in images.iter().enumerate() {
        let mut rest = y.0;
        for (a, e) in basis.iter().enumerate() {
            let c = linalg::frob_dot(&e.0, &y.0);
            m[(a, b)] = c;
            rest -= e.0 * cplx(c);
        }
        if scale > 0.0 {
            let rel = linalg::frob(&rest) / scale;
            if rel > PROJECTION_TOL {
                return Err(AnomalyError::ProjectionResidual(rel));
            }
        }
    }
    Ok(m)
}

/// Eigenvalues from a real Schur form with a bounded QR sweep. Clustered spectra can
/// stall deflation at machine epsilon, so the threshold is relaxed step by step.
fn eigenvalues_of(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    for eps in [f64::EPSILON, 1e-15, 1e-14, 1e-13, 1e-12] {
        if let Some(schur) = Schur::try_new(m.clone(), eps, 2000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(AnomalyError::Degenerate("Schur iteration did not converge".into()))
}

/// The 4×4 real matrix of the symbol restricted to the d-symbol kernel.
pub fn restricted_matrix(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
) -> Result<Matrix4<f64>> {
    require_nonzero(xi)?;
    check_positive(&omega.0, "ω")?;
    let basis = d_symbol_kernel(xi)?;
    let images: Vec<Psi22> =
        basis.iter().map(|b| delta_tilde_symbol_unchecked(xi, omega, vol, r, alpha, b)).collect();
    let m = project(&basis, &images)?;
    Ok(Matrix4::from_fn(|i, j| m[(i, j)]))
}

pub fn restricted_symbol(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
) -> Result<SymbolReport> {
    let m = restricted_matrix(xi, omega, vol, r, alpha)?;
    let ev = eigenvalues_of(&DMatrix::from_fn(4, 4, |i, j| m[(i, j)]))?;
    Ok(SymbolReport::from_eigenvalues(ev, 4))
}

/// Radical-inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    out
}

/// Deterministic low-discrepancy covectors, normalized to `|ξ|_ω = 1`.
///
/// Halton points in six dimensions are mapped to Gaussians by Box–Muller and
/// normalized; the seed offsets the sequence index.
pub fn sample_directions(omega: &Herm3, n_dirs: usize, seed: u64) -> Vec<Covector> {
    const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    let offset = 1 + (seed % (1 << 24)) * 7919;
    (0..n_dirs as u64)
        .map(|i| {
            let idx = offset + i;
            let u: Vec<f64> = PRIMES.iter().map(|&p| radical_inverse(idx, p).clamp(1e-12, 1.0 - 1e-12)).collect();
            let mut g = [0.0; 6];
            for pair in 0..3 {
                let rad = (-2.0 * u[2 * pair].ln()).sqrt();
                let ang = 2.0 * std::f64::consts::PI * u[2 * pair + 1];
                g[2 * pair] = rad * ang.cos();
                g[2 * pair + 1] = rad * ang.sin();
            }
            let xi = Covector::new([
                Complex64::new(g[0], g[1]),
                Complex64::new(g[2], g[3]),
                Complex64::new(g[4], g[5]),
            ]);
            let n = xi.norm_sq(omega).sqrt();
            Covector(xi.0 / cplx(n))
        })
        .collect()
}

/// Worst-case restricted symbol over `n_dirs` sampled unit covectors.
pub fn ellipticity_check(
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
    n_dirs: usize,
    seed: u64,
) -> Result<SymbolReport> {
    if n_dirs == 0 {
        return Err(AnomalyError::Input("n_dirs must be at least 1".into()));
    }
    check_positive(&omega.0, "ω")?;
    let mut worst: Option<SymbolReport> = None;
    for xi in sample_directions(omega, n_dirs, seed) {
        let rep = restricted_symbol(&xi, omega, vol, r, alpha)?;
        if worst.as_ref().is_none_or(|w| rep.min_real_part < w.min_real_part) {
            worst = Some(rep);
        }
    }
    Ok(worst.expect("n_dirs >= 1"))
}

/// Operator norm, on the d-symbol kernel, of
/// `δΨ ↦ −iξ∧ξ̄∧2α′ Rm(⟨⋆δΨ,ω⟩ω − ⋆δΨ)`.
///
/// A value below `|ξ|²_ω` is sufficient for the restricted symbol to be elliptic.
pub fn proposition_norm(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
) -> Result<f64> {
    require_nonzero(xi)?;
    check_positive(&omega.0, "ω")?;
    let basis = d_symbol_kernel(xi)?;
    // ⟨⋆δΨ,ω⟩ω − ⋆δΨ = 2‖Ω‖ ⋆̃δΨ
    let n = norm_omega_unchecked(omega, vol);
    let images: Vec<Psi22> = basis
        .iter()
        .map(|b| {
            let t = tilde_star_unchecked(b, omega, vol).scale(2.0 * n);
            let rm = rm_apply_unchecked(r, &t, omega);
            wedge_xi_extract(xi, &rm.scale(-2.0 * alpha))
        })
        .collect();
    let m = project(&basis, &images)?;
    Ok(m.singular_values().iter().copied().fold(0.0, f64::max))
}

fn check_positive_end(h: &HermEndE) -> Result<()> {
    let herm = (&h.0 + h.0.adjoint()) * cplx(0.5);
    let min_ev = herm.symmetric_eigenvalues().min();
    if linalg_dm_defect(&h.0) > 1e-12 * (1.0 + h.0.norm()) || !(min_ev > 0.0) {
        return Err(AnomalyError::Domain("H must be Hermitian positive definite".into()));
    }
    Ok(())
}

fn linalg_dm_defect(m: &DMatrix<Complex64>) -> f64 {
    (m - m.adjoint()).norm()
}

fn inverse_end(h: &HermEndE) -> Result<DMatrix<Complex64>> {
    h.0.clone()
        .try_inverse()
        .ok_or_else(|| AnomalyError::Domain("H is singular".into()))
}

/// `TrForm_{k̄j} = Tr(F_{k̄j} H^{-1} δH)`.
fn trace_form(f: &EndCurv, h_inv: &DMatrix<Complex64>, dh: &HermEndE) -> Herm3 {
    let g = h_inv * &dh.0;
    Herm3(Matrix3::from_fn(|k, j| (&f.entries[k][j] * &g).trace()))
}

/// Symbol of the coupled (Ψ, H) system: block upper-triangular by construction,
/// the H-row never reads δΨ.
#[allow(clippy::too_many_arguments)]
pub fn coupled_symbol(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
    f: &EndCurv,
    h: &HermEndE,
    dpsi: &Psi22,
    dh: &HermEndE,
) -> Result<(Psi22, HermEndE)> {
    require_nonzero(xi)?;
    check_positive(&omega.0, "ω")?;
    check_positive_end(h)?;
    if f.rank() != h.rank() || dh.rank() != h.rank() {
        return Err(AnomalyError::Input("bundle ranks of F, H and δH differ".into()));
    }
    let h_inv = inverse_end(h)?;
    let first = delta_tilde_symbol_unchecked(xi, omega, vol, r, alpha, dpsi)
        + wedge_xi_extract(xi, &trace_form(f, &h_inv, dh)).scale(2.0 * alpha);
    let second = HermEndE(&dh.0 * cplx(xi.norm_sq(omega)));
    Ok((first, second))
}

/// Frobenius-orthonormal real basis of r×r Hermitian matrices.
pub fn hermitian_basis(r: usize) -> Vec<DMatrix<Complex64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        let mut m = DMatrix::zeros(r, r);
        m[(i, i)] = cplx(1.0);
        out.push(m);
    }
    for i in 0..r {
        for j in i + 1..r {
            let mut a = DMatrix::zeros(r, r);
            a[(i, j)] = cplx(s);
            a[(j, i)] = cplx(s);
            out.push(a);
            let mut b = DMatrix::zeros(r, r);
            b[(i, j)] = Complex64::new(0.0, s);
            b[(j, i)] = Complex64::new(0.0, -s);
            out.push(b);
        }
    }
    out
}

/// Real matrix of [`coupled_symbol`] on `kernel ⊕ Herm(r)`, kernel block first.
#[allow(clippy::too_many_arguments)]
pub fn coupled_symbol_matrix(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
    f: &EndCurv,
    h: &HermEndE,
) -> Result<DMatrix<f64>> {
    let rank = h.rank();
    let kernel = d_symbol_kernel(xi)?;
    let hbasis = hermitian_basis(rank);
    let dim = kernel.len() + hbasis.len();
    let mut m = DMatrix::zeros(dim, dim);
    let zero_h = HermEndE::zeros(rank);
    let mut column = |col: usize, dpsi: &Psi22, dh: &HermEndE| -> Result<()> {
        let (a, b) = coupled_symbol(xi, omega, vol, r, alpha, f, h, dpsi, dh)?;
        let pa = project(&kernel, &[a])?;
        for i in 0..kernel.len() {
            m[(i, col)] = pa[(i, 0)];
        }
        let scale = b.0.norm();
        let mut rest = b.0.clone();
        for (i, e) in hbasis.iter().enumerate() {
            let c: f64 = e.iter().zip(b.0.iter()).map(|(x, y)| (x.conj() * y).re).sum();
            m[(kernel.len() + i, col)] = c;
            rest -= e * cplx(c);
        }
        if scale > 0.0 && rest.norm() / scale > PROJECTION_TOL {
            return Err(AnomalyError::ProjectionResidual(rest.norm() / scale));
        }
        Ok(())
    };
    for (c, b) in kernel.iter().enumerate() {
        column(c, b, &zero_h)?;
    }
    for (c, e) in hbasis.iter().enumerate() {
        column(kernel.len() + c, &Psi22::zero(), &HermEndE(e.clone()))?;
    }
    Ok(m)
}

pub fn coupled_spectrum(
    xi: &Covector,
    omega: &Herm3,
    vol: &VolumeData,
    r: &CurvTensor,
    alpha: f64,
    f: &EndCurv,
    h: &HermEndE,
) -> Result<Vec<Complex64>> {
    eigenvalues_of(&coupled_symbol_matrix(xi, omega, vol, r, alpha, f, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id() -> Herm3 {
        Herm3::identity()
    }

    #[test]
    fn rm_examples() {
        let w = id();
        assert_eq!(rm_apply(&CurvTensor::zero(), &Herm3::unit(0, 1), &w).unwrap(), Herm3::zero());
        let out = rm_apply(&CurvTensor::trace_model(1.0), &Herm3::unit(0, 0), &w).unwrap();
        assert!(linalg::frob(&(out.0 - Matrix3::identity())) < 1e-15);
    }

    #[test]
    fn kernel_for_first_axis() {
        let basis = d_symbol_kernel(&Covector::basis(0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            Psi22::unit(1, 1),
            Psi22::unit(2, 2),
            (Psi22::unit(1, 2) + Psi22::unit(2, 1)).scale(s),
            Psi22(Psi22::unit(1, 2).0 * Complex64::new(0.0, s) - Psi22::unit(2, 1).0 * Complex64::new(0.0, s)),
        ];
        for (b, e) in basis.iter().zip(expected.iter()) {
            assert!(linalg::frob(&(b.0 - e.0)) < 1e-15, "{b:?} vs {e:?}");
        }
    }

    #[test]
    fn zero_covector_rejected() {
        let zero = Covector::real([0.0; 3]);
        assert!(matches!(d_symbol_kernel(&zero), Err(AnomalyError::Degenerate(_))));
        assert!(restricted_symbol(&zero, &id(), &VolumeData::unit(), &CurvTensor::zero(), 0.0).is_err());
    }

    #[test]
    fn wedge_xi_examples() {
        let e1 = Covector::basis(0);
        assert_eq!(wedge_xi_extract(&e1, &Herm3::zero()), Psi22::zero());
        assert_eq!(wedge_xi_extract(&e1, &Herm3::unit(0, 0)), Psi22::zero());
        // i dz¹dz̄¹ ∧ i dz²dz̄² is half the (3,3̄) basis form
        let p = wedge_xi_extract(&e1, &Herm3::unit(1, 1));
        assert!(linalg::frob(&(p.0 - Psi22::unit(2, 2).scale(0.5).0)) < 1e-15);
    }

    #[test]
    fn kernel_symbol_example_at_identity() {
        let out = delta_tilde_symbol(
            &Covector::basis(0),
            &id(),
            &VolumeData::unit(),
            &CurvTensor::zero(),
            0.0,
            &Psi22::unit(1, 1),
        )
        .unwrap();
        assert!(linalg::frob(&(out.0 - Psi22::unit(1, 1).scale(0.5).0)) < 1e-15);
    }

    #[test]
    fn curvature_free_symbol_ignores_alpha() {
        let xi = Covector::new([Complex64::new(0.3, 0.1), cplx(-0.7), Complex64::new(0.0, 0.4)]);
        let w = Herm3::from_diag([1.0, 2.0, 0.5]);
        let v = VolumeData::new(1.3).unwrap();
        let d = Psi22::unit(0, 2) + Psi22::unit(2, 0);
        let a = delta_tilde_symbol(&xi, &w, &v, &CurvTensor::zero(), 0.0, &d).unwrap();
        let b = delta_tilde_symbol(&xi, &w, &v, &CurvTensor::zero(), 3.0, &d).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_symbol_is_half() {
        let rep = restricted_symbol(&Covector::basis(0), &id(), &VolumeData::unit(), &CurvTensor::zero(), 0.0).unwrap();
        assert!(rep.elliptic);
        assert_eq!(rep.kernel_dim, 4);
        for z in &rep.eigenvalues {
            assert!((z - cplx(0.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn trace_model_flips_at_one_eighth() {
        let xi = Covector::basis(0);
        let r = CurvTensor::trace_model(1.0);
        let v = VolumeData::unit();
        let below = restricted_symbol(&xi, &id(), &v, &r, 0.12).unwrap();
        let above = restricted_symbol(&xi, &id(), &v, &r, 0.13).unwrap();
        assert!(below.elliptic);
        assert!(!above.elliptic);
        let at = restricted_symbol(&xi, &id(), &v, &r, 0.125).unwrap();
        assert!(at.min_real_part.abs() < 1e-14);
    }

    #[test]
    fn proposition_norm_examples() {
        let xi = Covector::basis(0);
        let v = VolumeData::unit();
        assert_eq!(proposition_norm(&xi, &id(), &v, &CurvTensor::zero(), 0.7).unwrap(), 0.0);
        assert_eq!(proposition_norm(&xi, &id(), &v, &CurvTensor::trace_model(1.0), 0.0).unwrap(), 0.0);
        let a = proposition_norm(&xi, &id(), &v, &CurvTensor::trace_model(1.0), 0.01).unwrap();
        let b = proposition_norm(&xi, &id(), &v, &CurvTensor::trace_model(1.0), 0.02).unwrap();
        assert!((a - 0.08).abs() < 1e-14);
        assert!((b - 2.0 * a).abs() < 1e-14);
    }

    #[test]
    fn ellipticity_needs_directions() {
        let r = ellipticity_check(&id(), &VolumeData::unit(), &CurvTensor::zero(), 0.0, 0, 1);
        assert!(matches!(r, Err(AnomalyError::Input(_))));
    }

    #[test]
    fn sampled_directions_are_unit_and_deterministic() {
        let w = Herm3::from_diag([1.0, 3.0, 0.5]);
        let a = sample_directions(&w, 16, 4);
        let b = sample_directions(&w, 16, 4);
        assert_eq!(a, b);
        for xi in &a {
            assert!((xi.norm_sq(&w) - 1.0).abs() < 1e-12);
        }
        assert_ne!(a, sample_directions(&w, 16, 5));
    }

    #[test]
    fn coupled_flat_bundle_is_block_diagonal() {
        let xi = Covector::basis(1);
        let v = VolumeData::unit();
        let h = HermEndE::identity(2);
        let dh = HermEndE(DMatrix::from_fn(2, 2, |r, c| if r == c { cplx(1.0 + r as f64) } else { Complex64::new(0.2, if r < c { 0.3 } else { -0.3 }) }));
        let d = Psi22::unit(0, 0);
        let (a, b) = coupled_symbol(&xi, &id(), &v, &CurvTensor::zero(), 0.5, &EndCurv::zeros(2), &h, &d, &dh).unwrap();
        let expect = delta_tilde_symbol(&xi, &id(), &v, &CurvTensor::zero(), 0.5, &d).unwrap();
        assert_eq!(a, expect);
        assert_eq!(b.0, &dh.0 * cplx(1.0));
    }

    #[test]
    fn coupled_rejects_bad_h() {
        let h = HermEndE(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![cplx(1.0), cplx(-1.0)])));
        let r = coupled_symbol(
            &Covector::basis(0),
            &id(),
            &VolumeData::unit(),
            &CurvTensor::zero(),
            0.1,
            &EndCurv::zeros(2),
            &h,
            &Psi22::zero(),
            &HermEndE::zeros(2),
        );
        assert!(matches!(r, Err(AnomalyError::Domain(_))));
    }
}
