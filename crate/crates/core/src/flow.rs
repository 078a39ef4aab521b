//! Explicit Runge–Kutta integration of the Fu–Yau scalar flow and the reduced
//! torus (2,2)-form flow, with per-step monitors and halt diagnostics.

use nalgebra::{Cholesky, Matrix3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{AnomalyError, Result};
use crate::linalg::hermitian_part;
use crate::linearize::CurvTensor;
use crate::grid::{
    tr_r_wedge_r, Axis, Calculus, Field, OmegaField, PeriodicGrid, PsiField, ScalarField, SnapshotValue, Spectral,
};
use crate::pointwise::{
    check_positive, omega_from_psi, omega_from_psi_unchecked, psi_from_omega, Herm3, Psi22, VolumeData,
    POSITIVITY_EPS,
};

pub const DEFAULT_CFL: f64 = 0.2;
/// Admission threshold for `d_residual_22` of torus inputs.
pub const CLOSEDNESS_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct TimeControl {
    /// Fraction `C` in `dt ≤ C h² / D`, `D` the largest diffusion coefficient relative
    /// to the flat Laplacian `Δ = 2Σ ∂_j∂_{j̄}`.
    pub cfl: f64,
    /// Fixed step; the run halts if it ever exceeds the stability bound.
    pub fixed_dt: Option<f64>,
    pub max_steps: Option<usize>,
    pub margin_min: f64,
    pub snapshot_every: Option<usize>,
}

impl Default for TimeControl {
    fn default() -> Self {
        Self { cfl: DEFAULT_CFL, fixed_dt: None, max_steps: None, margin_min: 0.0, snapshot_every: None }
    }
}

impl TimeControl {
    fn validate(&self, t_end: f64) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(AnomalyError::Input(format!("cfl must be positive, got {}", self.cfl)));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(AnomalyError::Input(format!("fixed dt must be positive, got {dt}")));
            }
        }
        if !(t_end >= 0.0) {
            return Err(AnomalyError::Input(format!("final time must be nonnegative, got {t_end}")));
        }
        if t_end.is_infinite() && self.max_steps.is_none() {
            return Err(AnomalyError::Input("an unbounded run needs max_steps".into()));
        }
        if !(self.margin_min >= 0.0 && self.margin_min.is_finite()) {
            return Err(AnomalyError::Input(format!("margin_min must be nonnegative, got {}", self.margin_min)));
        }
        if self.snapshot_every == Some(0) {
            return Err(AnomalyError::Input("snapshot interval must be positive".into()));
        }
        Ok(())
    }

    fn step_size(&self, limit: f64, remaining: f64) -> std::result::Result<f64, HaltReason> {
        match self.fixed_dt {
            Some(dt) if dt > limit => Err(HaltReason::CflViolation { dt, limit }),
            Some(dt) => Ok(dt.min(remaining)),
            None => Ok(limit.min(remaining)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum HaltReason {
    Completed,
    StepLimit,
    ParabolicityLoss { margin: f64 },
    PositivityLoss { detail: String },
    CflViolation { dt: f64, limit: f64 },
    NonFinite,
}

impl HaltReason {
    /// True for halts caused by a breakdown of the flow rather than the schedule.
    pub fn is_breakdown(&self) -> bool {
        !matches!(self, HaltReason::Completed | HaltReason::StepLimit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    FuYau(ScalarField),
    Torus(PsiField),
}

impl Payload {
    pub fn to_snapshot(&self) -> SnapshotValue {
        match self {
            Payload::FuYau(u) => SnapshotValue::Real(u.clone()),
            Payload::Torus(p) => SnapshotValue::Psi(p.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FuYauMonitor {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub conservation_gap: f64,
    pub parabolicity_margin: f64,
    pub rhs_norm: f64,
    pub mean_exp_u: f64,
    pub l2_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TorusMonitor {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub balanced_residual: f64,
    pub min_eig_omega: f64,
    pub rhs_norm: f64,
    pub stationarity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Monitors {
    FuYau(Vec<FuYauMonitor>),
    Torus(Vec<TorusMonitor>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub step: usize,
    pub payload: Payload,
    pub monitors: Monitors,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub payload: Payload,
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub state: FlowState,
    pub halt: HaltReason,
    pub snapshots: Vec<Snapshot>,
    /// State on which the halt condition was detected, for breakdown halts.
    pub halt_snapshot: Option<Snapshot>,
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

fn rms_matrix(values: &[Matrix3<Complex64>]) -> f64 {
    (values.iter().map(|m| m.norm_squared()).sum::<f64>() / values.len() as f64).sqrt()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Smallest and largest eigenvalue of a 2×2 Hermitian matrix `[[a, b], [b̄, d]]`.
fn eig2(a: f64, b: Complex64, d: f64) -> (f64, f64) {
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mid - rad, mid + rad)
}

// ---------------------------------------------------------------------------
// Fu–Yau

#[derive(Clone, Debug, PartialEq)]
pub struct FuYauProblem {
    grid: PeriodicGrid,
    alpha: f64,
    f: ScalarField,
    mu: ScalarField,
    initial: ScalarField,
}

impl FuYauProblem {
    pub fn new(alpha: f64, f: ScalarField, mu: ScalarField) -> Result<Self> {
        let grid = *f.grid();
        if grid.complex_dims() != 2 {
            return Err(AnomalyError::Input("the Fu–Yau flow lives on a c = 2 grid".into()));
        }
        if mu.grid() != &grid {
            return Err(AnomalyError::Input("f and μ must share a grid".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(AnomalyError::Input(format!("α′ must be nonnegative, got {alpha}")));
        }
        if let Some(v) = f.values().iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(AnomalyError::Input(format!("f must be finite and nonnegative, found {v}")));
        }
        if mu.values().iter().any(|v| !v.is_finite()) {
            return Err(AnomalyError::Input("μ has non-finite values".into()));
        }
        Ok(Self { grid, alpha, initial: Field::constant(grid, 0.0), f, mu })
    }

    /// Adds `ε cos(k·x)` to the zero initial datum; `k` counts periods per real axis.
    pub fn with_perturbation(mut self, epsilon: f64, mode: [i64; 4]) -> Self {
        let scale = 2.0 * std::f64::consts::PI / self.grid.period();
        self.initial = Field::from_fn(self.grid, |x| {
            let phase: f64 = (0..4).map(|a| mode[a] as f64 * scale * x[a]).sum();
            epsilon * phase.cos()
        });
        self
    }

    /// Replaces the zero initial datum.
    pub fn with_initial(mut self, u0: ScalarField) -> Result<Self> {
        if u0.grid() != &self.grid {
            return Err(AnomalyError::Input("initial datum lives on a different grid".into()));
        }
        if !all_finite(u0.values()) {
            return Err(AnomalyError::Input("initial datum has non-finite values".into()));
        }
        self.initial = u0;
        Ok(self)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn mu(&self) -> &ScalarField {
        &self.mu
    }

    pub fn initial(&self) -> &ScalarField {
        &self.initial
    }
}

struct FuYauEval {
    rhs: Vec<f64>,
    margin: f64,
    diffusion: f64,
    mean_exp_u: f64,
}

/// Precomputed Fourier multipliers and work buffers for the Fu–Yau right-hand side.
struct FuYauKernel {
    spectral: Spectral,
    m11: Vec<f64>,
    m22: Vec<f64>,
    m12: Vec<Complex64>,
    neg: Vec<u32>,
    eu: Vec<f64>,
    packed: Vec<Complex64>,
    lap_u11: Vec<Complex64>,
    u22: Vec<Complex64>,
    u12: Vec<Complex64>,
}

impl FuYauKernel {
    fn new(grid: PeriodicGrid) -> Self {
        let spectral = Spectral::new(grid);
        let n = grid.len();
        let m11 = (0..n)
            .into_par_iter()
            .map(|i| spectral.multiplier_product(&[Axis::Anti(0), Axis::Holo(0)], i).re)
            .collect();
        let m22 = (0..n)
            .into_par_iter()
            .map(|i| spectral.multiplier_product(&[Axis::Anti(1), Axis::Holo(1)], i).re)
            .collect();
        let m12 = (0..n)
            .into_par_iter()
            .map(|i| spectral.multiplier_product(&[Axis::Anti(0), Axis::Holo(1)], i))
            .collect();
        let neg = (0..n).into_par_iter().map(|i| spectral.negate(i) as u32).collect();
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        Self {
            spectral,
            m11,
            m22,
            m12,
            neg,
            eu: vec![0.0; n],
            packed: zeros.clone(),
            lap_u11: zeros.clone(),
            u22: zeros.clone(),
            u12: zeros,
        }
    }

    /// `∂_t u = e^{-u}(Δ(e^u − α′f e^{-u}) + 4α′σ₂(u_{j̄k}) + μ)` with `Δ = 2Σ ∂_j∂_{j̄}`,
    /// plus the parabolicity margin and largest diffusion coefficient of the state.
    fn evaluate(&mut self, u: &[f64], prob: &FuYauProblem) -> FuYauEval {
        let a = prob.alpha;
        let f = prob.f.values();
        let mu = prob.mu.values();
        // u and g = e^u − α′f e^{-u} are both real: transform them as one complex field
        self.eu.par_iter_mut().zip(self.packed.par_iter_mut()).enumerate().for_each(|(i, (e, p))| {
            *e = u[i].exp();
            *p = Complex64::new(u[i], *e - a * f[i] / *e);
        });
        self.spectral.forward(&mut self.packed);
        let packed = &self.packed;
        let (m11, m22, m12, neg) = (&self.m11, &self.m22, &self.m12, &self.neg);
        self.lap_u11
            .par_iter_mut()
            .zip(self.u22.par_iter_mut())
            .zip(self.u12.par_iter_mut())
            .enumerate()
            .for_each(|(i, ((l, b), c))| {
                let h = packed[i];
                let hn = packed[neg[i] as usize].conj();
                let uh = (h + hn) * 0.5;
                let gh = (h - hn) * Complex64::new(0.0, -0.5);
                *l = gh * (2.0 * (m11[i] + m22[i])) + Complex64::new(0.0, m11[i]) * uh;
                *b = uh * m22[i];
                *c = uh * m12[i];
            });
        self.spectral.inverse(&mut self.lap_u11);
        self.spectral.inverse(&mut self.u22);
        self.spectral.inverse(&mut self.u12);

        let (eu, lap_u11, u22, u12) = (&self.eu, &self.lap_u11, &self.u22, &self.u12);
        let pointwise = |i: usize| {
            let emu = 1.0 / eu[i];
            let (lap_g, h11) = (lap_u11[i].re, lap_u11[i].im);
            let (h22, h12) = (u22[i].re, u12[i]);
            let sigma2 = h11 * h22 - h12.norm_sqr();
            let rhs = emu * (lap_g + 4.0 * a * sigma2 + mu[i]);
            let s = eu[i] + a * f[i] * emu;
            let (lo, hi) = eig2(s + 4.0 * a * h11, h12 * (4.0 * a), s + 4.0 * a * h22);
            (rhs, lo, emu * hi)
        };
        let mut rhs = vec![0.0; u.len()];
        let (margin, diffusion) = rhs
            .par_iter_mut()
            .enumerate()
            .map(|(i, r)| {
                let p = pointwise(i);
                *r = p.0;
                (p.1, p.2)
            })
            .reduce(|| (f64::INFINITY, 0.0), |x, y| (x.0.min(y.0), x.1.max(y.1)));
        FuYauEval { rhs, margin, diffusion, mean_exp_u: mean(eu) }
    }
}

fn check_fu_yau_grid(u: &ScalarField, prob: &FuYauProblem) -> Result<()> {
    if u.grid() != prob.grid() {
        return Err(AnomalyError::Input("u lives on a different grid than the problem".into()));
    }
    Ok(())
}

pub fn fu_yau_rhs(u: &ScalarField, prob: &FuYauProblem) -> Result<ScalarField> {
    check_fu_yau_grid(u, prob)?;
    let eval = FuYauKernel::new(prob.grid).evaluate(u.values(), prob);
    Field::new(prob.grid, eval.rhs)
}

/// Smallest eigenvalue over the grid of `(e^u + α′f e^{-u}) δ_{jk} + 4α′ u_{j̄k}`.
pub fn parabolicity_margin(u: &ScalarField, prob: &FuYauProblem) -> Result<f64> {
    check_fu_yau_grid(u, prob)?;
    Ok(FuYauKernel::new(prob.grid).evaluate(u.values(), prob).margin)
}

fn stability_limit(grid: &PeriodicGrid, cfl: f64, diffusion: f64) -> f64 {
    let h = grid.spacing();
    if diffusion <= 0.0 {
        return f64::INFINITY;
    }
    cfl * h * h / diffusion
}

fn on_grid<T: Clone>(grid: PeriodicGrid, values: Vec<T>) -> Field<T> {
    Field::new(grid, values).expect("state length matches its grid")
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

pub fn fu_yau_run(prob: &FuYauProblem, t_end: f64, ctrl: &TimeControl) -> Result<FlowRun> {
    ctrl.validate(t_end)?;
    let mut kernel = FuYauKernel::new(prob.grid);
    let grid = prob.grid;
    let n = grid.len();
    let mean_mu = mean(prob.mu.values());
    let mut u = prob.initial.values().to_vec();
    let base = mean(&u.iter().map(|v| v.exp()).collect::<Vec<_>>());
    let monitor = |step: usize, t: f64, dt: f64, u: &[f64], eval: &FuYauEval| {
        let mean_exp_u = eval.mean_exp_u;
        FuYauMonitor {
            step,
            t,
            dt,
            conservation_gap: (mean_exp_u - base - t * mean_mu).abs(),
            parabolicity_margin: eval.margin,
            rhs_norm: rms(&eval.rhs),
            mean_exp_u,
            l2_norm: rms(u),
        }
    };
    let mut t = 0.0;
    let mut step = 0;
    let mut eval = kernel.evaluate(&u, prob);
    let mut rows = vec![monitor(0, 0.0, 0.0, &u, &eval)];
    let mut snapshots = Vec::new();
    let payload = |u: &[f64]| Payload::FuYau(on_grid(grid, u.to_vec()));
    let halt = loop {
        if !(eval.margin > ctrl.margin_min) {
            break HaltReason::ParabolicityLoss { margin: eval.margin };
        }
        if t >= t_end {
            break HaltReason::Completed;
        }
        if ctrl.max_steps.is_some_and(|m| step >= m) {
            break HaltReason::StepLimit;
        }
        let limit = stability_limit(&grid, ctrl.cfl, eval.diffusion);
        if limit.is_nan() {
            break HaltReason::NonFinite;
        }
        let dt = match ctrl.step_size(limit, t_end - t) {
            Ok(dt) => dt,
            Err(h) => break h,
        };
        let stage = |k: &[f64], c: f64| -> Vec<f64> { u.par_iter().zip(k).map(|(a, b)| a + c * dt * b).collect() };
        let k1 = std::mem::take(&mut eval.rhs);
        let k2 = kernel.evaluate(&stage(&k1, 0.5), prob).rhs;
        let k3 = kernel.evaluate(&stage(&k2, 0.5), prob).rhs;
        let k4 = kernel.evaluate(&stage(&k3, 1.0), prob).rhs;
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if !all_finite(&next) {
            break HaltReason::NonFinite;
        }
        u = next;
        t = if dt == t_end - t { t_end } else { t + dt };
        step += 1;
        eval = kernel.evaluate(&u, prob);
        rows.push(monitor(step, t, dt, &u, &eval));
        if ctrl.snapshot_every.is_some_and(|k| step % k == 0) {
            snapshots.push(Snapshot { step, t, payload: payload(&u) });
        }
    };
    let halt_snapshot = halt.is_breakdown().then(|| Snapshot { step, t, payload: payload(&u) });
    Ok(FlowRun {
        state: FlowState { t, step, payload: payload(&u), monitors: Monitors::FuYau(rows) },
        halt,
        snapshots,
        halt_snapshot,
    })
}

// ---------------------------------------------------------------------------
// torus

#[derive(Clone, Debug, PartialEq)]
pub struct TorusProblem {
    grid: PeriodicGrid,
    alpha: f64,
    vol: VolumeData,
    phi0: PsiField,
    psi0: PsiField,
}

impl TorusProblem {
    /// Starts from the metric `ω₀`, i.e. `Ψ₀ = ‖Ω‖_{ω₀} ω₀²`.
    pub fn new(alpha: f64, vol: VolumeData, phi0: PsiField, omega0: &OmegaField) -> Result<Self> {
        let mut values = Vec::with_capacity(omega0.values().len());
        for (i, w) in omega0.values().iter().enumerate() {
            let psi = psi_from_omega(w, &vol).map_err(|e| {
                AnomalyError::PositivityLoss(format!("initial metric at grid point {i}: {e}"))
            })?;
            values.push(psi);
        }
        Self::from_psi(alpha, vol, phi0, Field::new(*omega0.grid(), values)?)
    }

    pub fn from_psi(alpha: f64, vol: VolumeData, phi0: PsiField, psi0: PsiField) -> Result<Self> {
        let grid = *psi0.grid();
        if phi0.grid() != &grid {
            return Err(AnomalyError::Input("Φ₀ and Ψ₀ must share a grid".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(AnomalyError::Input(format!("α′ must be nonnegative, got {alpha}")));
        }
        if phi0.values().iter().chain(psi0.values()).any(|p| !p.is_hermitian(1e-12 * (1.0 + p.norm()))) {
            return Err(AnomalyError::Input("Φ₀ and Ψ₀ must be Hermitian at every point".into()));
        }
        let calc = Calculus::new(grid);
        let r_phi = calc.d_residual_22(&phi0)?;
        if !(r_phi < CLOSEDNESS_TOL) {
            return Err(AnomalyError::Input(format!("Φ₀ is not closed: d-residual {r_phi:.3e}")));
        }
        let r_psi = calc.d_residual_22(&psi0)?;
        if !(r_psi < CLOSEDNESS_TOL) {
            return Err(AnomalyError::Input(format!("initial state is not balanced: d-residual {r_psi:.3e}")));
        }
        for (i, p) in psi0.values().iter().enumerate() {
            omega_from_psi(p, &vol)
                .map_err(|e| AnomalyError::PositivityLoss(format!("initial Ψ at grid point {i}: {e}")))?;
        }
        Ok(Self { grid, alpha, vol, phi0, psi0 })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vol(&self) -> &VolumeData {
        &self.vol
    }

    pub fn phi0(&self) -> &PsiField {
        &self.phi0
    }

    pub fn psi0(&self) -> &PsiField {
        &self.psi0
    }
}

/// The `Φ₀` for which `Ψ₀` is a stationary point: `Φ₀ = Tr(R∧R) + i∂∂̄ω₀/α′`.
pub fn balancing_phi0(alpha: f64, vol: &VolumeData, psi0: &PsiField) -> Result<PsiField> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(AnomalyError::Input(format!("α′ must be positive, got {alpha}")));
    }
    let calc = Calculus::new(*psi0.grid());
    let parts = torus_parts(&calc, psi0.values(), vol, alpha, true)?;
    let values = parts
        .ddbar
        .iter()
        .zip(&parts.trace_rr)
        .map(|(d, t)| Psi22(t + d / Complex64::new(alpha, 0.0)))
        .collect();
    Field::new(*psi0.grid(), values)
}

struct TorusParts {
    ddbar: Vec<Matrix3<Complex64>>,
    trace_rr: Vec<Matrix3<Complex64>>,
    min_eig: f64,
    diffusion: f64,
}

/// Metric at one point from Ψ, with `‖Ω‖_ω` and, when `spectrum` is set, the smallest
/// eigenvalue of ω (NaN otherwise).
///
/// The eigenvalues of `ω = adj Ψ / |Ω|²` are `λ_jλ_k / |Ω|²` for the eigenvalues
/// `λ` of Ψ, so one decomposition serves both positivity checks.
fn metric_point(psi: &Psi22, vol: &VolumeData, spectrum: bool) -> Result<(Herm3, f64, f64)> {
    if !spectrum {
        if Cholesky::new(hermitian_part(&psi.0)).is_none() {
            return Err(AnomalyError::Domain("Ψ is not positive definite".into()));
        }
        let (w, n) = omega_from_psi_unchecked(psi, vol);
        return Ok((w, n, f64::NAN));
    }
    let ev = check_positive(&psi.0, "Ψ")?;
    let a2 = vol.abs_omega() * vol.abs_omega();
    let w_ev = [ev[0] * ev[1] / a2, ev[0] * ev[2] / a2, ev[1] * ev[2] / a2];
    if w_ev[0] <= POSITIVITY_EPS * w_ev.iter().sum::<f64>() {
        return Err(AnomalyError::Domain("ω is numerically singular".into()));
    }
    let (w, n) = omega_from_psi_unchecked(psi, vol);
    Ok((w, n, w_ev[0]))
}

fn omega_field(
    grid: &PeriodicGrid,
    psi: &[Psi22],
    vol: &VolumeData,
    spectrum: bool,
) -> Result<(Vec<Matrix3<Complex64>>, Vec<f64>, Vec<f64>)> {
    let points: Vec<Result<(Herm3, f64, f64)>> = psi.par_iter().map(|p| metric_point(p, vol, spectrum)).collect();
    let mut omega = Vec::with_capacity(psi.len());
    let mut norms = Vec::with_capacity(psi.len());
    let mut eigs = Vec::with_capacity(psi.len());
    for (i, r) in points.into_iter().enumerate() {
        let (w, n, l) = r.map_err(|e| {
            AnomalyError::PositivityLoss(format!(
                "grid point {:?}: {e}",
                &grid.lattice_index(i)[..grid.real_axes()]
            ))
        })?;
        omega.push(w.0);
        norms.push(n);
        eigs.push(l);
    }
    Ok((omega, norms, eigs))
}

/// Right-hand side pieces at Ψ. Without `spectrum` only `ddbar` and `trace_rr` are
/// meaningful; `min_eig` and `diffusion` come back as NaN.
fn torus_parts(calc: &Calculus, psi: &[Psi22], vol: &VolumeData, alpha: f64, spectrum: bool) -> Result<TorusParts> {
    let grid = *calc.grid();
    let (w, norms, eigs) = omega_field(&grid, psi, vol, spectrum)?;
    // with one active direction every R lies along dz₀∧dz̄₀, so R∧R vanishes
    let wedge = alpha > 0.0 && calc.active() >= 2;
    let curvature = wedge || (alpha > 0.0 && spectrum);
    let jets = calc.metric_jets(&w, curvature);
    let ddbar = calc.ddbar_from_jets(&jets);
    let r = on_grid(grid, if curvature { calc.curvature_from_jets(&w, &jets) } else { vec![CurvTensor::zero(); psi.len()] });
    let trace_rr = if wedge {
        let raw: Vec<Matrix3<Complex64>> = tr_r_wedge_r(&r).values().iter().map(|p| p.0).collect();
        let filtered = calc.dealias_matrix(&raw);
        filtered.into_iter().map(|m| (m + m.adjoint()) * Complex64::new(0.5, 0.0)).collect()
    } else {
        vec![Matrix3::zeros(); psi.len()]
    };
    if !spectrum {
        return Ok(TorusParts { ddbar, trace_rr, min_eig: f64::NAN, diffusion: f64::NAN });
    }
    let curv_norm = r.values().par_iter().map(|t| t.norm()).reduce(|| 0.0, f64::max);
    let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    // symbol of Ψ ↦ i∂∂̄(⋆̃Ψ) is |ξ|²_ω / (2‖Ω‖_ω), and Δ has symbol 2|ξ|²
    let diffusion = eigs
        .iter()
        .zip(&norms)
        .map(|(l, n)| (1.0 + 8.0 * alpha * curv_norm) / (4.0 * n * l))
        .fold(0.0, f64::max);
    Ok(TorusParts { ddbar, trace_rr, min_eig, diffusion })
}

struct TorusEval {
    rhs: Vec<Matrix3<Complex64>>,
    min_eig: f64,
    diffusion: f64,
}

fn torus_evaluate(calc: &Calculus, psi: &[Psi22], prob: &TorusProblem, spectrum: bool) -> Result<TorusEval> {
    let parts = torus_parts(calc, psi, &prob.vol, prob.alpha, spectrum)?;
    let a = Complex64::new(prob.alpha, 0.0);
    let rhs = parts
        .ddbar
        .par_iter()
        .zip(parts.trace_rr.par_iter())
        .zip(prob.phi0.values().par_iter())
        .map(|((d, t), phi)| if prob.alpha > 0.0 { d + (t - phi.0) * a } else { *d })
        .collect();
    Ok(TorusEval { rhs, min_eig: parts.min_eig, diffusion: parts.diffusion })
}

fn check_torus_grid(psi: &PsiField, prob: &TorusProblem) -> Result<()> {
    if psi.grid() != prob.grid() {
        return Err(AnomalyError::Input("Ψ lives on a different grid than the problem".into()));
    }
    Ok(())
}

/// `∂_tΨ = i∂∂̄ω + α′(Tr R∧R − Φ₀)` with `ω` recovered pointwise from `Ψ`.
pub fn torus_rhs(psi: &PsiField, prob: &TorusProblem) -> Result<PsiField> {
    check_torus_grid(psi, prob)?;
    let calc = Calculus::new(prob.grid);
    let eval = torus_evaluate(&calc, psi.values(), prob, true)?;
    Field::new(prob.grid, eval.rhs.into_iter().map(Psi22).collect())
}

/// `‖i∂∂̄ω + α′(Tr R∧R − Φ₀)‖_{L²} / ‖Ψ‖_{L²}` at the state's payload.
pub fn stationarity_report(state: &FlowState, prob: &TorusProblem) -> Result<f64> {
    let Payload::Torus(psi) = &state.payload else {
        return Err(AnomalyError::Input("stationarity is defined for torus states only".into()));
    };
    check_torus_grid(psi, prob)?;
    let calc = Calculus::new(prob.grid);
    let eval = torus_evaluate(&calc, psi.values(), prob, true)?;
    let psi_m: Vec<Matrix3<Complex64>> = psi.values().iter().map(|p| p.0).collect();
    Ok(rms_matrix(&eval.rhs) / rms_matrix(&psi_m))
}

pub fn torus_run(prob: &TorusProblem, t_end: f64, ctrl: &TimeControl) -> Result<FlowRun> {
    ctrl.validate(t_end)?;
    let grid = prob.grid;
    let calc = Calculus::new(grid);
    let mut psi: Vec<Psi22> = prob.psi0.values().to_vec();
    let field = |v: &[Psi22]| on_grid(grid, v.to_vec());
    let monitor = |step: usize, t: f64, dt: f64, psi: &[Psi22], eval: &TorusEval| -> Result<TorusMonitor> {
        let psi_m: Vec<Matrix3<Complex64>> = psi.iter().map(|p| p.0).collect();
        let rhs_norm = rms_matrix(&eval.rhs);
        Ok(TorusMonitor {
            step,
            t,
            dt,
            balanced_residual: calc.d_residual_22(&field(psi))?,
            min_eig_omega: eval.min_eig,
            rhs_norm,
            stationarity: rhs_norm / rms_matrix(&psi_m),
        })
    };
    let mut t = 0.0;
    let mut step = 0;
    let mut eval = torus_evaluate(&calc, &psi, prob, true)?;
    let mut rows = vec![monitor(0, 0.0, 0.0, &psi, &eval)?];
    let mut snapshots = Vec::new();
    let mut halt_payload = None;
    let halt = loop {
        if t >= t_end {
            break HaltReason::Completed;
        }
        if ctrl.max_steps.is_some_and(|m| step >= m) {
            break HaltReason::StepLimit;
        }
        let limit = stability_limit(&grid, ctrl.cfl, eval.diffusion);
        if limit.is_nan() {
            break HaltReason::NonFinite;
        }
        let dt = match ctrl.step_size(limit, t_end - t) {
            Ok(dt) => dt,
            Err(h) => break h,
        };
        let stage = |k: &[Matrix3<Complex64>], c: f64| -> Vec<Psi22> {
            let s = Complex64::new(c * dt, 0.0);
            psi.par_iter().zip(k).map(|(p, d)| Psi22(p.0 + d * s)).collect()
        };
        let k1 = std::mem::take(&mut eval.rhs);
        let mut ks = vec![k1];
        let mut failed = None;
        for c in [0.5, 0.5, 1.0] {
            let arg = stage(ks.last().expect("k1 present"), c);
            match torus_evaluate(&calc, &arg, prob, false) {
                Ok(e) => ks.push(e.rhs),
                Err(AnomalyError::PositivityLoss(detail)) => {
                    failed = Some((detail, arg));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some((detail, arg)) = failed {
            halt_payload = Some(arg);
            break HaltReason::PositivityLoss { detail };
        }
        let w = Complex64::new(dt / 6.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        let next: Vec<Psi22> = (0..psi.len())
            .into_par_iter()
            .map(|i| Psi22(psi[i].0 + (ks[0][i] + (ks[1][i] + ks[2][i]) * two + ks[3][i]) * w))
            .collect();
        if next.iter().any(|p| p.0.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()))) {
            break HaltReason::NonFinite;
        }
        t = if dt == t_end - t { t_end } else { t + dt };
        step += 1;
        match torus_evaluate(&calc, &next, prob, true) {
            Ok(e) => eval = e,
            Err(AnomalyError::PositivityLoss(detail)) => {
                psi = next;
                halt_payload = Some(psi.clone());
                break HaltReason::PositivityLoss { detail };
            }
            Err(e) => return Err(e),
        }
        psi = next;
        rows.push(monitor(step, t, dt, &psi, &eval)?);
        if ctrl.snapshot_every.is_some_and(|k| step % k == 0) {
            snapshots.push(Snapshot { step, t, payload: Payload::Torus(field(&psi)) });
        }
    };
    let halt_snapshot = if halt.is_breakdown() {
        let v = halt_payload.unwrap_or_else(|| psi.clone());
        Some(Snapshot { step, t, payload: Payload::Torus(field(&v)) })
    } else {
        None
    };
    Ok(FlowRun {
        state: FlowState { t, step, payload: Payload::Torus(field(&psi)), monitors: Monitors::Torus(rows) },
        halt,
        snapshots,
        halt_snapshot,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(c: usize, n: usize) -> PeriodicGrid {
        PeriodicGrid::new(c, n, 2.0 * PI).unwrap()
    }

    fn fu_yau(n: usize, alpha: f64, f: f64, mu: f64) -> FuYauProblem {
        let g = grid(2, n);
        FuYauProblem::new(alpha, Field::constant(g, f), Field::constant(g, mu)).unwrap()
    }

    #[test]
    fn fu_yau_rhs_examples() {
        let prob = fu_yau(8, 0.5, 0.0, 0.0);
        let zero = Field::constant(*prob.grid(), 0.0);
        assert!(fu_yau_rhs(&zero, &prob).unwrap().values().iter().all(|v| *v == 0.0));

        let prob = fu_yau(8, 0.5, 0.0, 0.7);
        let u = Field::constant(*prob.grid(), 0.3);
        let rhs = fu_yau_rhs(&u, &prob).unwrap();
        assert!(rhs.values().iter().all(|v| (v - 0.7 * (-0.3f64).exp()).abs() < 1e-14));
    }

    #[test]
    fn fu_yau_rhs_linearizes_to_laplacian() {
        // Δ = 2Σ∂_j∂_{j̄} acts on cos(x₁) as multiplication by −1/2
        for eps in [1e-3, 5e-4] {
            let prob = fu_yau(8, 0.1, 0.0, 0.0);
            let u = Field::from_fn(*prob.grid(), |x| eps * x[0].cos());
            let rhs = fu_yau_rhs(&u, &prob).unwrap();
            let err = rhs.values().iter().zip(u.values()).map(|(r, v)| (r + 0.5 * v).abs()).fold(0.0, f64::max);
            assert!(err < 2.0 * eps * eps, "{eps} {err}");
        }
    }

    #[test]
    fn margin_examples() {
        let prob = fu_yau(8, 0.3, 0.0, 0.0);
        let zero = Field::constant(*prob.grid(), 0.0);
        assert_eq!(parabolicity_margin(&zero, &prob).unwrap(), 1.0);
        let prob = fu_yau(8, 0.3, 2.5, 0.0);
        assert_eq!(parabolicity_margin(&zero, &prob).unwrap(), 1.0 + 0.3 * 2.5);
        let prob = fu_yau(16, 1.0, 0.0, 0.0);
        let spike = Field::from_fn(*prob.grid(), |x| 4.0 * (x[0].cos() - 1.0));
        assert!(parabolicity_margin(&spike, &prob).unwrap() <= 0.0);
    }

    #[test]
    fn fu_yau_zero_data_is_stationary() {
        let prob = fu_yau(8, 0.2, 0.0, 0.0);
        let run = fu_yau_run(&prob, 1.0, &TimeControl::default()).unwrap();
        assert_eq!(run.halt, HaltReason::Completed);
        assert_eq!(run.state.t, 1.0);
        let Payload::FuYau(u) = &run.state.payload else { panic!() };
        assert!(u.values().iter().all(|v| *v == 0.0));
        let Monitors::FuYau(rows) = &run.state.monitors else { panic!() };
        assert!(rows.iter().all(|r| r.conservation_gap == 0.0));
    }

    #[test]
    fn fu_yau_constant_mu_conserves() {
        let prob = fu_yau(8, 0.2, 0.0, 0.5);
        let run = fu_yau_run(&prob, 1.0, &TimeControl::default()).unwrap();
        let Monitors::FuYau(rows) = &run.state.monitors else { panic!() };
        for r in rows {
            assert!((r.mean_exp_u - (1.0 + 0.5 * r.t)).abs() < 1e-6 * (1.0 + 0.5 * r.t));
            assert!(r.conservation_gap < 1e-6 * (1.0 + r.t));
        }
    }

    #[test]
    fn fu_yau_halts_on_lost_parabolicity() {
        let g = grid(2, 8);
        let prob = fu_yau(8, 1.0, 0.0, 0.0)
            .with_initial(Field::from_fn(g, |x| 4.0 * (x[0].cos() - 1.0)))
            .unwrap();
        let run = fu_yau_run(&prob, 1.0, &TimeControl::default()).unwrap();
        assert!(matches!(run.halt, HaltReason::ParabolicityLoss { .. }));
        let snap = run.halt_snapshot.unwrap();
        let Payload::FuYau(u) = &snap.payload else { panic!() };
        assert!(parabolicity_margin(u, &prob).unwrap() <= 0.0);
    }

    #[test]
    fn fu_yau_rejects_oversized_fixed_step() {
        let prob = fu_yau(8, 0.0, 0.0, 0.0);
        let ctrl = TimeControl { fixed_dt: Some(1.0), ..Default::default() };
        let run = fu_yau_run(&prob, 1.0, &ctrl).unwrap();
        assert!(matches!(run.halt, HaltReason::CflViolation { .. }));
        assert!(FuYauProblem::new(0.1, Field::constant(grid(2, 8), -1.0), Field::constant(grid(2, 8), 0.0)).is_err());
        assert!(FuYauProblem::new(0.1, Field::constant(grid(1, 8), 0.0), Field::constant(grid(1, 8), 0.0)).is_err());
    }

    fn bump(g: PeriodicGrid, amp: f64) -> PsiField {
        // i∂∂̄ of a band-limited (1,1)-form added to the identity: exact, hence closed
        let chi: OmegaField = Field::from_fn(g, |x| {
            let mut m = Herm3::from_diag([x[0].cos(), (x[1] + x[0]).sin(), 0.5 * x[1].cos()]);
            m.0[(0, 2)] = Complex64::new(0.3 * x[0].sin(), 0.2 * x[1].cos());
            m.0[(2, 0)] = m.0[(0, 2)].conj();
            m
        });
        let d = Calculus::new(g).i_ddbar_11(&chi).unwrap();
        d.map(|p| Psi22(Matrix3::identity() + p.0 * Complex64::new(amp, 0.0)))
    }

    #[test]
    fn flat_kahler_is_stationary() {
        let g = grid(1, 8);
        let omega0 = Field::constant(g, Herm3::from_diag([1.0, 2.0, 0.5]));
        let prob = TorusProblem::new(0.3, VolumeData::unit(), Field::constant(g, Psi22::zero()), &omega0).unwrap();
        let rhs = torus_rhs(prob.psi0(), &prob).unwrap();
        assert!(rhs.values().iter().all(|p| p.norm() < 1e-14));
    }

    #[test]
    fn balancing_phi0_gives_stationary_point() {
        let g = grid(2, 8);
        let psi0 = Field::from_fn(g, |x| {
            Psi22::from_diag([1.0 + 0.2 * x[2].cos(), 1.0 + 0.3 * x[1].sin(), 1.0 + 0.25 * (x[0] - x[3]).cos()])
        });
        let vol = VolumeData::unit();
        let phi0 = balancing_phi0(0.5, &vol, &psi0).unwrap();
        let prob = TorusProblem::from_psi(0.5, vol, phi0, psi0).unwrap();
        let state = FlowState {
            t: 0.0,
            step: 0,
            payload: Payload::Torus(prob.psi0().clone()),
            monitors: Monitors::Torus(Vec::new()),
        };
        assert!(stationarity_report(&state, &prob).unwrap() < 1e-10);
    }

    #[test]
    fn torus_rhs_is_closed() {
        let g = grid(2, 8);
        let psi0 = bump(g, 0.05);
        let vol = VolumeData::unit();
        let calc = Calculus::new(g);
        assert!(calc.d_residual_22(&psi0).unwrap() < 1e-12);
        let prob = TorusProblem::from_psi(0.2, vol, Field::constant(g, Psi22::zero()), psi0).unwrap();
        let rhs = torus_rhs(prob.psi0(), &prob).unwrap();
        let shifted = rhs.map(|p| Psi22(p.0 + Matrix3::identity()));
        assert!(calc.d_residual_22(&shifted).unwrap() < 1e-8);
    }

    #[test]
    fn torus_problem_validation() {
        let g = grid(1, 8);
        let vol = VolumeData::unit();
        let open = Field::from_fn(g, |x| Psi22::from_diag([1.0 + 0.3 * x[0].cos(), 1.0, 1.0]));
        let zero = Field::constant(g, Psi22::zero());
        assert!(TorusProblem::from_psi(0.1, vol, zero.clone(), open.clone()).is_err());
        assert!(TorusProblem::from_psi(0.1, vol, open, Field::constant(g, Psi22::identity())).is_err());
        let negative = Field::constant(g, Psi22::from_diag([1.0, -1.0, 1.0]));
        assert!(matches!(
            TorusProblem::from_psi(0.1, vol, zero, negative),
            Err(AnomalyError::PositivityLoss(_))
        ));
    }

    #[test]
    fn torus_run_preserves_balance() {
        let g = grid(1, 16);
        let prob =
            TorusProblem::from_psi(0.0, VolumeData::unit(), Field::constant(g, Psi22::zero()), bump(g, 0.1)).unwrap();
        let ctrl = TimeControl { max_steps: Some(40), ..Default::default() };
        let run = torus_run(&prob, f64::INFINITY, &ctrl).unwrap();
        assert_eq!(run.halt, HaltReason::StepLimit);
        let Monitors::Torus(rows) = &run.state.monitors else { panic!() };
        assert_eq!(rows.len(), 41);
        assert!(rows.iter().all(|r| r.balanced_residual < 1e-12));
        assert!(rows.last().unwrap().stationarity < rows[0].stationarity);
    }

    #[test]
    fn torus_halts_on_positivity_loss() {
        let g = grid(1, 8);
        let vol = VolumeData::unit();
        let phi0 = Field::constant(g, Psi22::identity().scale(100.0));
        let prob = TorusProblem::from_psi(1.0, vol, phi0, Field::constant(g, Psi22::identity())).unwrap();
        let run = torus_run(&prob, 1.0, &TimeControl::default()).unwrap();
        assert!(matches!(run.halt, HaltReason::PositivityLoss { .. }), "{:?}", run.halt);
        let snap = run.halt_snapshot.unwrap();
        let Payload::Torus(psi) = &snap.payload else { panic!() };
        assert!(psi.values().iter().any(|p| omega_from_psi(p, &vol).is_err()));
    }
}
