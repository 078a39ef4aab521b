use std::sync::OnceLock;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{Axis, Field, OmegaField, PeriodicGrid, PsiField, ScalarField, Spectral};
use crate::error::{AnomalyError, Result};
use crate::form_oracle::{self, mat3_from_fn, MultiVector};
use crate::linalg::{adjugate, det, hermitian_eigenvalues, mul3, trace_mul};
use crate::linearize::CurvTensor;
use crate::pointwise::{check_positive, wedge11_sparse, wedge11_table, Psi22};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Contributions of `dz^l ∧ ·` (slot `l`) or `dz̄^l ∧ ·` (slot `3 + l`) applied to the
/// basis (2,2)-form of each component `(k, j)`, as `(5-form slot, coefficient)`.
type ExteriorTable = Vec<Vec<Vec<(usize, Complex64)>>>;

fn exterior_table() -> &'static ExteriorTable {
    static TABLE: OnceLock<ExteriorTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..6)
            .map(|dir| {
                let one: MultiVector<Complex64> =
                    if dir < 3 { MultiVector::dz(dir) } else { MultiVector::dzbar(dir - 3) };
                (0..9)
                    .map(|p| {
                        let unit = mat3_from_fn(|r, c| {
                            if r * 3 + c == p {
                                Complex64::new(1.0, 0.0)
                            } else {
                                ZERO
                            }
                        });
                        let five = one.wedge(&form_oracle::from_form22(&unit));
                        five.terms()
                            .map(|(m, c)| ((m.holo as usize) * 8 + m.anti as usize, *c))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    })
}

fn inverse(m: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    adjugate(m) / det(m)
}

fn hermitize(m: Matrix3<Complex64>) -> Matrix3<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub(crate) struct MetricJets {
    first: Vec<Vec<Matrix3<Complex64>>>,
    mixed: Vec<Vec<Vec<Matrix3<Complex64>>>>,
}

/// Spectral calculus on one grid; holds the shared transform plan.
pub struct Calculus {
    spectral: Spectral,
}

impl Calculus {
    pub fn new(grid: PeriodicGrid) -> Self {
        Self { spectral: Spectral::new(grid) }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub(crate) fn active(&self) -> usize {
        self.grid().complex_dims()
    }

    fn check_grid<T>(&self, f: &Field<T>) -> Result<()> {
        if f.grid() != self.grid() {
            return Err(AnomalyError::Input("field lives on a different grid".into()));
        }
        Ok(())
    }

    pub fn diff(&self, f: &Field<Complex64>, axis: Axis) -> Result<Field<Complex64>> {
        self.check_grid(f)?;
        self.spectral.check_axis(axis)?;
        let hat = self.spectral.to_spectral(f.values());
        Ok(Field { grid: *self.grid(), values: self.spectral.apply(&hat, &[axis]) })
    }

    pub fn diff_real(&self, f: &ScalarField, axis: Axis) -> Result<Field<Complex64>> {
        self.check_grid(f)?;
        self.spectral.check_axis(axis)?;
        let hat = self.spectral.to_spectral_real(f.values());
        Ok(Field { grid: *self.grid(), values: self.spectral.apply(&hat, &[axis]) })
    }

    /// Two-thirds filter applied componentwise to a matrix field.
    pub fn dealias_matrix(&self, values: &[Matrix3<Complex64>]) -> Vec<Matrix3<Complex64>> {
        let hats = self.entry_hats(values);
        let filtered: Vec<Vec<Complex64>> = hats.iter().map(|h| self.spectral.apply(h, &[])).collect();
        assemble(values.len(), &filtered)
    }

    fn entry_hats(&self, values: &[Matrix3<Complex64>]) -> Vec<Vec<Complex64>> {
        (0..9)
            .map(|p| {
                let entry: Vec<Complex64> = values.par_iter().map(|m| m[(p / 3, p % 3)]).collect();
                self.spectral.to_spectral(&entry)
            })
            .collect()
    }

    /// Entry transforms of a Hermitian field; the lower triangle comes from
    /// `hat(f̄)(k) = conj(hat(f)(-k))`.
    fn hermitian_hats(&self, values: &[Matrix3<Complex64>]) -> Vec<Vec<Complex64>> {
        let mut hats: Vec<Vec<Complex64>> = vec![Vec::new(); 9];
        for r in 0..3 {
            for c in r..3 {
                let entry: Vec<Complex64> = values.par_iter().map(|m| m[(r, c)]).collect();
                hats[r * 3 + c] = self.spectral.to_spectral(&entry);
            }
        }
        for r in 1..3 {
            for c in 0..r {
                let upper = &hats[c * 3 + r];
                let lower = (0..upper.len()).into_par_iter().map(|k| upper[self.spectral.negate(k)].conj()).collect();
                hats[r * 3 + c] = lower;
            }
        }
        hats
    }

    /// `i∂∂̄ω` as a (2,2)-form.
    pub fn i_ddbar_11(&self, omega: &OmegaField) -> Result<PsiField> {
        self.check_grid(omega)?;
        let values: Vec<Matrix3<Complex64>> = omega.values().iter().map(|w| w.0).collect();
        let out = self.i_ddbar_matrix(&values);
        Ok(Field { grid: *self.grid(), values: out.into_iter().map(|m| Psi22(hermitize(m))).collect() })
    }

    /// `i∂∂̄(i φ_{k̄j} dz^j∧dz̄^k) = Σ ∂_a∂_{b̄}φ_{k̄j} · (i dz^a∧dz̄^b) ∧ (i dz^j∧dz̄^k)`.
    pub(crate) fn i_ddbar_matrix(&self, values: &[Matrix3<Complex64>]) -> Vec<Matrix3<Complex64>> {
        let table = wedge11_table();
        let c = self.active();
        let hats = self.entry_hats(values);
        let spec = &self.spectral;
        let modes: Vec<[Complex64; 9]> = (0..values.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = [ZERO; 9];
                if !spec.retained(i) {
                    return acc;
                }
                for a in 0..c {
                    for b in 0..c {
                        let m = spec.multiplier_product(&[Axis::Holo(a), Axis::Anti(b)], i);
                        if m == ZERO {
                            continue;
                        }
                        let t_ab = &table[b * 3 + a];
                        for (p, hat) in hats.iter().enumerate() {
                            let v = hat[i] * m;
                            if v == ZERO {
                                continue;
                            }
                            let t = &t_ab[p];
                            for (o, slot) in acc.iter_mut().enumerate() {
                                let w = t[(o / 3, o % 3)];
                                if w != ZERO {
                                    *slot += v * w;
                                }
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut outs: Vec<Vec<Complex64>> =
            (0..9).map(|o| modes.par_iter().map(|m| m[o]).collect()).collect();
        for o in outs.iter_mut() {
            spec.inverse(o);
        }
        assemble(values.len(), &outs)
    }

    /// Chern curvature `R_{k̄j}{}^p{}_q = −∂_{k̄}(ω^{ps̄} ∂_j ω_{s̄q})`, expanded as
    /// `ω^{-1}(∂_{k̄}ω)ω^{-1}∂_jω − ω^{-1}∂_j∂_{k̄}ω`.
    pub fn chern_curvature(&self, omega: &OmegaField) -> Result<Field<CurvTensor>> {
        self.check_grid(omega)?;
        check_positive_field(omega)?;
        let w: Vec<Matrix3<Complex64>> = omega.values().iter().map(|w| w.0).collect();
        let jets = self.metric_jets(&w, true);
        Ok(Field { grid: *self.grid(), values: self.curvature_from_jets(&w, &jets) })
    }

    /// Spectral derivatives of a Hermitian matrix field: `first[j] = ∂_jω` (only when
    /// requested) and `mixed[j][k] = ∂_j∂_{k̄}ω`.
    pub(crate) fn metric_jets(&self, values: &[Matrix3<Complex64>], with_first: bool) -> MetricJets {
        let c = self.active();
        let n = values.len();
        let hats = self.hermitian_hats(values);
        // a Hermitian result only needs its upper triangle transformed
        let derive = |axes: &[Axis], hermitian: bool| -> Vec<Matrix3<Complex64>> {
            let d: Vec<Option<Vec<Complex64>>> = (0..9)
                .map(|p| (!hermitian || p / 3 <= p % 3).then(|| self.spectral.apply(&hats[p], axes)))
                .collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    Matrix3::from_fn(|r, c| match &d[r * 3 + c] {
                        Some(v) => v[i],
                        None => d[c * 3 + r].as_ref().expect("upper entry")[i].conj(),
                    })
                })
                .collect()
        };
        let first = if with_first { (0..c).map(|j| derive(&[Axis::Holo(j)], false)).collect() } else { Vec::new() };
        let mut mixed: Vec<Vec<Vec<Matrix3<Complex64>>>> = vec![vec![Vec::new(); c]; c];
        for j in 0..c {
            for k in j..c {
                mixed[j][k] = derive(&[Axis::Holo(j), Axis::Anti(k)], j == k);
            }
        }
        // ∂_j∂_{k̄}ω = (∂_k∂_{j̄}ω)^H for Hermitian ω
        for j in 0..c {
            for k in 0..j {
                mixed[j][k] = mixed[k][j].par_iter().map(|m| m.adjoint()).collect();
            }
        }
        MetricJets { first, mixed }
    }

    /// `i∂∂̄ω` assembled pointwise from the mixed derivatives.
    pub(crate) fn ddbar_from_jets(&self, jets: &MetricJets) -> Vec<Matrix3<Complex64>> {
        let c = self.active();
        let n = jets.mixed[0][0].len();
        // unit form (b, a) wedged with unit form q, for active a, b
        let terms: Vec<(usize, usize, usize, &[(usize, Complex64)])> = wedge11_sparse()
            .iter()
            .filter(|(p, _, _)| p % 3 < c && p / 3 < c)
            .map(|(p, q, t)| (p % 3, p / 3, *q, t.as_slice()))
            .collect();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = [ZERO; 9];
                for &(a, b, q, t) in &terms {
                    let v = jets.mixed[a][b][i][(q / 3, q % 3)];
                    for (o, coef) in t {
                        acc[*o] += coef * v;
                    }
                }
                hermitize(Matrix3::from_fn(|r, k| acc[r * 3 + k]))
            })
            .collect()
    }

    pub(crate) fn curvature_from_jets(&self, omega: &[Matrix3<Complex64>], jets: &MetricJets) -> Vec<CurvTensor> {
        let c = self.active();
        omega
            .par_iter()
            .enumerate()
            .map(|(i, w)| {
                let inv = inverse(w);
                let mut t = CurvTensor::zero();
                for k in 0..c {
                    // ∂_{k̄}ω = (∂_kω)^H
                    let left = mul3(&mul3(&inv, &jets.first[k][i].adjoint()), &inv);
                    for j in 0..c {
                        t.entries[k][j] = mul3(&left, &jets.first[j][i]) - mul3(&inv, &jets.mixed[j][k][i]);
                    }
                }
                t
            })
            .collect()
    }

    /// `‖dΨ‖_{L²} / ‖Ψ‖_{L²}`, with dΨ the full 5-form.
    pub fn d_residual_22(&self, psi: &PsiField) -> Result<f64> {
        self.check_grid(psi)?;
        let c = self.active();
        let table = exterior_table();
        let values: Vec<Matrix3<Complex64>> = psi.values().iter().map(|p| p.0).collect();
        let hats = self.entry_hats(&values);
        let mut five = vec![vec![ZERO; values.len()]; 64];
        let mut touched = [false; 64];
        for l in 0..c {
            for (dir, axis) in [(l, Axis::Holo(l)), (3 + l, Axis::Anti(l))] {
                for (p, hat) in hats.iter().enumerate() {
                    let terms = &table[dir][p];
                    if terms.is_empty() {
                        continue;
                    }
                    let deriv = self.spectral.apply(hat, &[axis]);
                    for &(slot, coef) in terms {
                        touched[slot] = true;
                        five[slot].par_iter_mut().zip(deriv.par_iter()).for_each(|(o, d)| *o += coef * d);
                    }
                }
            }
        }
        let num: f64 = (0..64)
            .filter(|&s| touched[s])
            .map(|s| five[s].iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        let den: f64 = values.iter().map(|m| m.norm_squared()).sum();
        if den == 0.0 {
            return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok((num / den).sqrt())
    }
}

fn assemble(n: usize, entries: &[Vec<Complex64>]) -> Vec<Matrix3<Complex64>> {
    (0..n)
        .into_par_iter()
        .map(|i| Matrix3::from_fn(|r, c| entries[r * 3 + c][i]))
        .collect()
}

/// Fails with the first grid point whose metric is not positive.
pub fn check_positive_field(omega: &OmegaField) -> Result<()> {
    let bad = omega
        .values()
        .par_iter()
        .enumerate()
        .filter_map(|(i, w)| check_positive(&w.0, "ω").err().map(|e| (i, e)))
        .min_by_key(|(i, _)| *i);
    match bad {
        None => Ok(()),
        Some((i, e)) => Err(AnomalyError::PositivityLoss(format!(
            "grid point {:?}: {e}",
            &omega.grid().lattice_index(i)[..omega.grid().real_axes()]
        ))),
    }
}

/// Pointwise `Tr(R∧R)` with `R = i R_{k̄j} dz^j∧dz̄^k`.
pub fn tr_r_wedge_r(r: &Field<CurvTensor>) -> PsiField {
    let sparse = wedge11_sparse();
    r.map(|t| {
        let mut live = [false; 9];
        for (p, l) in live.iter_mut().enumerate() {
            *l = t.entries[p / 3][p % 3].iter().any(|v| *v != ZERO);
        }
        let mut out = [ZERO; 9];
        for (p, q, terms) in sparse {
            if !(live[*p] && live[*q]) {
                continue;
            }
            let tr = trace_mul(&t.entries[p / 3][p % 3], &t.entries[q / 3][q % 3]);
            for (o, c) in terms {
                out[*o] += c * tr;
            }
        }
        Psi22(hermitize(Matrix3::from_fn(|i, j| out[i * 3 + j])))
    })
}

/// Smallest eigenvalue of the metric over the grid.
pub fn min_eigenvalue(omega: &OmegaField) -> f64 {
    omega
        .values()
        .par_iter()
        .map(|w| hermitian_eigenvalues(&w.0)[0])
        .reduce(|| f64::INFINITY, f64::min)
}

pub fn i_ddbar_11(omega: &OmegaField) -> Result<PsiField> {
    Calculus::new(*omega.grid()).i_ddbar_11(omega)
}

pub fn chern_curvature(omega: &OmegaField) -> Result<Field<CurvTensor>> {
    Calculus::new(*omega.grid()).chern_curvature(omega)
}

pub fn d_residual_22(psi: &PsiField) -> Result<f64> {
    Calculus::new(*psi.grid()).d_residual_22(psi)
}

pub fn diff(f: &Field<Complex64>, axis: Axis) -> Result<Field<Complex64>> {
    Calculus::new(*f.grid()).diff(f, axis)
}
