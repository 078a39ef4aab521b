//! Seeded property suites over the pointwise algebra and the symbol analysis.

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::config::{Tolerances, VerifySpec};
use super::sampling::{self, SuiteRng};
use crate::error::Result;
use crate::form_oracle::{form10, from_form11, to_form22, Coefficient, GaussRational, MultiVector};
use crate::linalg::{self, det3, frob, from_array};
use crate::linearize::{
    coupled_spectrum, d_symbol_kernel, proposition_norm, restricted_symbol, sample_directions, wedge_xi_extract,
    Covector,
};
use crate::pointwise::{
    hodge_star22, norm_omega, omega_from_psi, psi_from_omega, tilde_star, variation_consistency, Herm3, Psi22,
};

pub type StarFn = fn(&Psi22, &Herm3) -> Result<Herm3>;

/// Implementations under test that a fixture may replace.
#[derive(Clone, Copy)]
pub struct VerifyHooks {
    pub hodge_star: StarFn,
}

impl Default for VerifyHooks {
    fn default() -> Self {
        Self { hodge_star: hodge_star22 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub identity: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn failing(&self) -> impl Iterator<Item = &SuiteResult> {
        self.suites.iter().filter(|s| !s.passed)
    }
}

struct Tally {
    trials: usize,
    failures: usize,
    max_residual: f64,
}

impl Tally {
    fn new() -> Self {
        Self { trials: 0, failures: 0, max_residual: 0.0 }
    }

    /// Records one trial; errors and non-finite residuals count as failures.
    fn record(&mut self, outcome: Result<f64>, tol: f64) {
        self.trials += 1;
        match outcome {
            Ok(r) if r.is_finite() => {
                self.max_residual = self.max_residual.max(r);
                if r > tol {
                    self.failures += 1;
                }
            }
            _ => {
                self.failures += 1;
                self.max_residual = f64::INFINITY;
            }
        }
    }

    fn finish(self, name: &'static str, identity: &'static str, tolerance: f64) -> SuiteResult {
        SuiteResult {
            name,
            identity,
            trials: self.trials,
            failures: self.failures,
            max_residual: self.max_residual,
            tolerance,
            passed: self.failures == 0 && self.trials > 0,
        }
    }
}

fn oracle_square(omega: &Herm3) -> Matrix3<Complex64> {
    let f = from_form11(&omega.to_array());
    from_array(&to_form22(&f.wedge(&f)).expect("(1,1)∧(1,1) is (2,2)"))
}

fn rel(a: &Matrix3<Complex64>, b: &Matrix3<Complex64>) -> f64 {
    frob(&(a - b)) / frob(b).max(f64::MIN_POSITIVE)
}

fn suite_wedge(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new();
    let one_form = |rng: &mut SuiteRng| -> MultiVector<Complex64> {
        let holo = form10(&[0; 3].map(|_: i32| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)));
        let anti = form10(&[0; 3].map(|_: i32| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)));
        holo.add(&anti.conjugate())
    };
    let size = |m: &MultiVector<Complex64>| m.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    for _ in 0..n {
        let (a, b, c, d) = (one_form(rng), one_form(rng), one_form(rng), one_form(rng));
        let anti = size(&a.wedge(&b).add(&b.wedge(&a)));
        let square = size(&a.wedge(&a));
        let (ab, cd) = (a.wedge(&b), c.wedge(&d));
        let even = size(&ab.wedge(&cd).sub(&cd.wedge(&ab)));
        let assoc = size(&a.wedge(&b.wedge(&c)).sub(&a.wedge(&b).wedge(&c)));
        t.record(Ok(anti.max(square).max(even).max(assoc)), tol);
    }
    t.finish("wedge_rules", "graded anticommutativity and associativity of ∧", tol)
}

fn suite_cofactor(rng: &mut SuiteRng, n: usize) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let w = sampling::gauss_rational_herm(rng);
        let f = from_form11(&w);
        let outcome = to_form22(&f.wedge(&f)).map(|psi| {
            let det = det3(&w);
            let mut bad = 0usize;
            for r in 0..3 {
                for c in 0..3 {
                    let mut acc = <GaussRational as Coefficient>::zero();
                    for k in 0..3 {
                        acc = acc + psi[r][k].clone() * w[k][c].clone();
                    }
                    let want = if r == c { det.clone() } else { <GaussRational as Coefficient>::zero() };
                    if acc != want {
                        bad += 1;
                    }
                }
            }
            bad as f64
        });
        t.record(outcome, 0.0);
    }
    t.finish("cofactor_exact", "to_form22(ω∧ω)·ω = det(ω)·I in exact arithmetic", 0.0)
}

fn suite_roundtrip(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let psi = sampling::positive_psi(rng);
        let vol = sampling::volume(rng);
        let outcome = omega_from_psi(&psi, &vol)
            .and_then(|(w, _)| psi_from_omega(&w, &vol))
            .map(|back| rel(&back.0, &psi.0));
        t.record(outcome, tol);
    }
    t.finish("root_roundtrip", "psi_from_omega(omega_from_psi(Ψ)) = Ψ", tol)
}

fn suite_star(rng: &mut SuiteRng, n: usize, tol: f64, star: StarFn) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let omega = sampling::positive_herm(rng);
        let vol = sampling::volume(rng);
        let outcome = norm_omega(&omega, &vol).and_then(|nrm| {
            let psi = Psi22(oracle_square(&omega) * Complex64::new(nrm, 0.0));
            let target = omega.0 * Complex64::new(2.0 * nrm, 0.0);
            star(&psi, &omega).map(|s| rel(&s.0, &target))
        });
        t.record(outcome, tol);
    }
    t.finish("star_identity", "⋆_ω(‖Ω‖ω²) = 2‖Ω‖ω", tol)
}

fn suite_variation(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    const H: f64 = 1e-5;
    let mut t = Tally::new();
    for _ in 0..n {
        let omega = sampling::positive_herm(rng);
        let vol = sampling::volume(rng);
        let dpsi = sampling::unit_direction(rng);
        let outcome = variation_consistency(&omega, &vol, &dpsi, H).and_then(|r1| {
            let r2 = variation_consistency(&omega, &vol, &dpsi, 0.5 * H)?;
            // first-order residual: halving h must roughly halve it
            Ok(if r2 <= 0.6 * r1 { r1 } else { f64::INFINITY })
        });
        t.record(outcome, tol);
    }
    t.finish("variation", "finite-difference δω equals ⋆̃δΨ, residual O(h)", tol)
}

fn suite_kernel(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let omega = sampling::positive_herm(rng);
        let vol = sampling::volume(rng);
        let xi = sampling::covector(rng);
        let outcome = d_symbol_kernel(&xi).and_then(|basis| {
            if basis.len() != 4 {
                return Ok(f64::INFINITY);
            }
            let coeffs: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mut dpsi = Psi22::zero();
            for (b, c) in basis.iter().zip(&coeffs) {
                dpsi = dpsi + b.scale(*c);
            }
            let nrm = norm_omega(&omega, &vol)?;
            let ts = tilde_star(&dpsi, &omega, &vol)?;
            let a = form10(&[xi.0[0], xi.0[1], xi.0[2]]);
            let lhs = a
                .wedge(&a.conjugate())
                .scale(&Complex64::new(0.0, 1.0))
                .wedge(&from_form11(&ts.to_array()));
            let lhs = from_array(&to_form22(&lhs)?);
            let rhs = dpsi.0 * Complex64::new(xi.norm_sq(&omega) / (2.0 * nrm), 0.0);
            Ok(rel(&lhs, &rhs))
        });
        t.record(outcome, tol);
    }
    t.finish("kernel_symbol", "iξ∧ξ̄∧⋆̃δΨ = |ξ|²/(2‖Ω‖)·δΨ on the d-symbol kernel", tol)
}

fn suite_xi_wedge(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let xi = sampling::covector(rng);
        let phi = Herm3(sampling::herm_matrix(rng));
        let out = wedge_xi_extract(&xi, &phi);
        let contracted = xi.0.transpose() * out.0;
        let scale = xi.0.norm() * out.0.norm();
        t.record(Ok(contracted.norm() / scale.max(f64::MIN_POSITIVE)), tol);
    }
    t.finish("xi_wedge_kernel", "ξ_j(iξ∧ξ̄∧φ)^{jk̄} = 0", tol)
}

fn suite_symbol_alpha0(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let omega = sampling::positive_herm(rng);
        let vol = sampling::volume(rng);
        let xi = sampling::covector(rng);
        let r = sampling::real_curvature(rng, &omega, 1.0);
        let outcome = norm_omega(&omega, &vol).and_then(|nrm| {
            let want = xi.norm_sq(&omega) / (2.0 * nrm);
            let rep = restricted_symbol(&xi, &omega, &vol, &r, 0.0)?;
            let worst = rep.eigenvalues.iter().map(|z| (z - want).norm()).fold(0.0, f64::max);
            Ok(if rep.kernel_dim == 4 && rep.elliptic { worst / want } else { f64::INFINITY })
        });
        t.record(outcome, tol);
    }
    t.finish("symbol_alpha_zero", "restricted symbol at α′ = 0 is |ξ|²/(2‖Ω‖)", tol)
}

/// Draws whose proposition norm stays below `|ξ|²` must be elliptic; residual is the
/// number of counterexamples per draw.
fn suite_sufficiency(rng: &mut SuiteRng, n: usize, directions: usize) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let omega = sampling::positive_herm(rng);
        let vol = sampling::volume(rng);
        let size = 0.1 + 4.0 * rng.gen::<f64>();
        let r = sampling::real_curvature(rng, &omega, size);
        let alpha = 0.5 * rng.gen::<f64>();
        let seed = rng.gen::<u64>();
        let outcome = (|| -> Result<f64> {
            let mut bad = 0usize;
            for xi in sample_directions(&omega, directions.max(1), seed) {
                let p = proposition_norm(&xi, &omega, &vol, &r, alpha)?;
                if p < xi.norm_sq(&omega) && !restricted_symbol(&xi, &omega, &vol, &r, alpha)?.elliptic {
                    bad += 1;
                }
            }
            Ok(bad as f64)
        })();
        t.record(outcome, 0.0);
    }
    t.finish("proposition_sufficiency", "proposition_norm < |ξ|² implies an elliptic verdict", 0.0)
}

fn match_spectra(got: &[Complex64], want: &[Complex64]) -> f64 {
    if got.len() != want.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; want.len()];
    let mut worst: f64 = 0.0;
    for z in got {
        let (idx, d) = want
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, w)| (i, (z - w).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("equal lengths");
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}

fn suite_coupled(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new();
    for trial in 0..n {
        let rank = 1 + trial % 3;
        let omega = sampling::positive_herm(rng);
        let vol = sampling::volume(rng);
        let xi = sampling::covector(rng);
        let r = sampling::real_curvature(rng, &omega, 1.0);
        let h = sampling::positive_end(rng, rank);
        let f = sampling::real_end_curvature(rng, &h);
        let alpha = rng.gen::<f64>();
        let outcome = (|| -> Result<f64> {
            let got = coupled_spectrum(&xi, &omega, &vol, &r, alpha, &f, &h)?;
            let mut want = restricted_symbol(&xi, &omega, &vol, &r, alpha)?.eigenvalues;
            let n2 = xi.norm_sq(&omega);
            want.extend(std::iter::repeat(Complex64::new(n2, 0.0)).take(rank * rank));
            let scale = want.iter().map(|z| z.norm()).fold(0.0, f64::max);
            Ok(match_spectra(&got, &want) / scale)
        })();
        t.record(outcome, tol);
    }
    t.finish("coupled_block", "coupled spectrum = restricted spectrum ∪ {|ξ|²}^{r²}", tol)
}

/// Runs every suite with independent seeded streams.
pub fn run_suites(seed: u64, counts: &VerifySpec, tol: &Tolerances, hooks: &VerifyHooks) -> VerifyReport {
    let suites = vec![
        suite_wedge(&mut sampling::suite_rng(seed, 1), counts.cofactor, tol.wedge),
        suite_cofactor(&mut sampling::suite_rng(seed, 2), counts.cofactor),
        suite_roundtrip(&mut sampling::suite_rng(seed, 3), counts.roundtrip, tol.root),
        suite_star(&mut sampling::suite_rng(seed, 4), counts.star, tol.star, hooks.hodge_star),
        suite_variation(&mut sampling::suite_rng(seed, 5), counts.variation, tol.variation),
        suite_kernel(&mut sampling::suite_rng(seed, 6), counts.kernel, tol.kernel),
        suite_xi_wedge(&mut sampling::suite_rng(seed, 7), counts.kernel, tol.wedge),
        suite_symbol_alpha0(&mut sampling::suite_rng(seed, 8), counts.kernel, tol.symbol),
        suite_sufficiency(&mut sampling::suite_rng(seed, 9), counts.symbol, counts.directions),
        suite_frame(&mut sampling::suite_rng(seed, 10), counts.kernel, tol.symbol),
        suite_coupled(&mut sampling::suite_rng(seed, 11), counts.coupled, tol.coupled),
    ];
    let passed = suites.iter().all(|s| s.passed);
    VerifyReport { seed, passed, suites }
}

fn suite_frame(rng: &mut SuiteRng, n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new();
    for _ in 0..n {
        let omega = sampling::positive_herm(rng);
        let vol = sampling::volume(rng);
        let xi = sampling::covector(rng);
        let r = sampling::real_curvature(rng, &omega, 1.0);
        let alpha = rng.gen::<f64>();
        let u = sampling::unitary(rng);
        let outcome = (|| -> Result<f64> {
            let base = restricted_symbol(&xi, &omega, &vol, &r, alpha)?.eigenvalues;
            let moved_omega = Herm3(linalg::hermitian_part(&(u.adjoint() * omega.0 * u)));
            let moved_xi = Covector(u.transpose() * xi.0);
            let moved = restricted_symbol(&moved_xi, &moved_omega, &vol, &r.change_frame(&u), alpha)?.eigenvalues;
            let scale = base.iter().map(|z| z.norm()).fold(0.0, f64::max);
            Ok(match_spectra(&moved, &base) / scale)
        })();
        t.record(outcome, tol);
    }
    t.finish("frame_covariance", "restricted spectrum is invariant under unitary frame changes", tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifySpec {
        VerifySpec { cofactor: 5, roundtrip: 20, star: 10, variation: 10, kernel: 10, symbol: 10, coupled: 6, directions: 4 }
    }

    #[test]
    fn small_run_passes() {
        let rep = run_suites(3, &small(), &Tolerances::default(), &VerifyHooks::default());
        for s in &rep.suites {
            assert!(s.passed, "{s:?}");
        }
        assert!(rep.passed);
    }

    #[test]
    fn flipped_star_is_caught() {
        fn flipped(psi: &Psi22, w: &Herm3) -> Result<Herm3> {
            hodge_star22(psi, w).map(|s| s.scale(-1.0))
        }
        let rep = run_suites(3, &small(), &Tolerances::default(), &VerifyHooks { hodge_star: flipped });
        let failing: Vec<_> = rep.failing().map(|s| s.name).collect();
        assert_eq!(failing, vec!["star_identity"]);
    }

    #[test]
    fn deterministic() {
        let a = run_suites(11, &small(), &Tolerances::default(), &VerifyHooks::default());
        let b = run_suites(11, &small(), &Tolerances::default(), &VerifyHooks::default());
        assert_eq!(a, b);
    }
}
