//! C ABI over `anomaly-core`.
//!
//! Matrices cross the boundary as 18 doubles: row-major entries, each as `(re, im)`.
//! Covectors are 6 doubles, curvature tensors 162 doubles ordered `[k][j][p][q]`.
//! Every function returns an [`AnomalyStatus`]; on failure the message is available
//! from [`anomaly_last_error`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use anomaly::flow::{
    balancing_phi0, fu_yau_run, torus_run, FlowRun, FuYauProblem, HaltReason, Monitors, Payload, TimeControl,
    TorusProblem,
};
use anomaly::grid::{Field, PeriodicGrid};
use anomaly::linearize::{ellipticity_check, proposition_norm, restricted_symbol, CurvTensor, Covector};
use anomaly::pointwise::{hodge_star22, omega_from_psi, psi_from_omega, tilde_star, Herm3, Psi22, VolumeData};
use anomaly::AnomalyError;
use nalgebra::Matrix3;
use num_complex::Complex64;

pub const ANOMALY_MATRIX_LEN: usize = 18;
pub const ANOMALY_COVECTOR_LEN: usize = 6;
pub const ANOMALY_CURVATURE_LEN: usize = 162;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnomalyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Domain = 3,
    Degenerate = 4,
    PositivityLoss = 5,
    Io = 6,
    NotRun = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnomalyHalt {
    Completed = 0,
    StepLimit = 1,
    ParabolicityLoss = 2,
    PositivityLoss = 3,
    CflViolation = 4,
    NonFinite = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AnomalyFuYauMonitor {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub conservation_gap: f64,
    pub parabolicity_margin: f64,
    pub rhs_norm: f64,
    pub mean_exp_u: f64,
    pub l2_norm: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AnomalyTorusMonitor {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub balanced_residual: f64,
    pub min_eig_omega: f64,
    pub rhs_norm: f64,
    pub stationarity: f64,
}

/// Step-size control; `fixed_dt <= 0` selects the adaptive bound and `max_steps == 0`
/// means no step limit.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnomalyTimeControl {
    pub cfl: f64,
    pub fixed_dt: f64,
    pub max_steps: u64,
    pub margin_min: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &AnomalyError) -> AnomalyStatus {
    match e {
        AnomalyError::Domain(_) | AnomalyError::Conditioning { .. } => AnomalyStatus::Domain,
        AnomalyError::Degenerate(_) | AnomalyError::ProjectionResidual(_) | AnomalyError::Bidegree { .. } => {
            AnomalyStatus::Degenerate
        }
        AnomalyError::PositivityLoss(_) => AnomalyStatus::PositivityLoss,
        AnomalyError::Io(_) | AnomalyError::Snapshot(_) => AnomalyStatus::Io,
        AnomalyError::Input(_) | AnomalyError::InactiveAxis(_) | AnomalyError::Json(_) => AnomalyStatus::InvalidInput,
    }
}

struct Fail(AnomalyStatus, String);

impl From<AnomalyError> for Fail {
    fn from(e: AnomalyError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AnomalyStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(body: F) -> AnomalyStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            AnomalyStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AnomalyStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

fn read_matrix(a: &[f64]) -> Matrix3<Complex64> {
    Matrix3::from_fn(|r, c| Complex64::new(a[2 * (3 * r + c)], a[2 * (3 * r + c) + 1]))
}

fn write_matrix(m: &Matrix3<Complex64>, out: &mut [f64]) {
    for r in 0..3 {
        for c in 0..3 {
            out[2 * (3 * r + c)] = m[(r, c)].re;
            out[2 * (3 * r + c) + 1] = m[(r, c)].im;
        }
    }
}

fn read_curvature(a: &[f64]) -> CurvTensor {
    let mut r = CurvTensor::zero();
    for k in 0..3 {
        for j in 0..3 {
            r.entries[k][j] = read_matrix(&a[18 * (3 * k + j)..18 * (3 * k + j + 1)]);
        }
    }
    r
}

fn read_covector(a: &[f64]) -> Covector {
    Covector::new([Complex64::new(a[0], a[1]), Complex64::new(a[2], a[3]), Complex64::new(a[4], a[5])])
}

fn volume(abs_omega: f64) -> Result<VolumeData, Fail> {
    Ok(VolumeData::new(abs_omega)?)
}

/// Message of the last failure on this thread; empty after a success. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn anomaly_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn anomaly_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `Ψ = ‖Ω‖_ω ω²`.
#[no_mangle]
pub unsafe extern "C" fn anomaly_psi_from_omega(omega: *const f64, abs_omega: f64, out_psi: *mut f64) -> AnomalyStatus {
    guard(|| {
        let w = Herm3(read_matrix(input(omega, ANOMALY_MATRIX_LEN, "omega")?));
        let psi = psi_from_omega(&w, &volume(abs_omega)?)?;
        write_matrix(&psi.0, output(out_psi, ANOMALY_MATRIX_LEN, "out_psi")?);
        Ok(())
    })
}

/// Inverse of [`anomaly_psi_from_omega`]; `out_norm` receives `‖Ω‖_ω` and may be null.
#[no_mangle]
pub unsafe extern "C" fn anomaly_omega_from_psi(
    psi: *const f64,
    abs_omega: f64,
    out_omega: *mut f64,
    out_norm: *mut f64,
) -> AnomalyStatus {
    guard(|| {
        let p = Psi22(read_matrix(input(psi, ANOMALY_MATRIX_LEN, "psi")?));
        let (w, n) = omega_from_psi(&p, &volume(abs_omega)?)?;
        write_matrix(&w.0, output(out_omega, ANOMALY_MATRIX_LEN, "out_omega")?);
        if !out_norm.is_null() {
            out_norm.write(n);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn anomaly_hodge_star22(psi: *const f64, metric: *const f64, out: *mut f64) -> AnomalyStatus {
    guard(|| {
        let p = Psi22(read_matrix(input(psi, ANOMALY_MATRIX_LEN, "psi")?));
        let m = Herm3(read_matrix(input(metric, ANOMALY_MATRIX_LEN, "metric")?));
        write_matrix(&hodge_star22(&p, &m)?.0, output(out, ANOMALY_MATRIX_LEN, "out")?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn anomaly_tilde_star(
    dpsi: *const f64,
    omega: *const f64,
    abs_omega: f64,
    out: *mut f64,
) -> AnomalyStatus {
    guard(|| {
        let d = Psi22(read_matrix(input(dpsi, ANOMALY_MATRIX_LEN, "dpsi")?));
        let w = Herm3(read_matrix(input(omega, ANOMALY_MATRIX_LEN, "omega")?));
        write_matrix(&tilde_star(&d, &w, &volume(abs_omega)?)?.0, output(out, ANOMALY_MATRIX_LEN, "out")?);
        Ok(())
    })
}

/// Restricted symbol at one covector. `out_eigenvalues` receives 4 complex values
/// (8 doubles) and may be null.
#[no_mangle]
pub unsafe extern "C" fn anomaly_restricted_symbol(
    xi: *const f64,
    omega: *const f64,
    abs_omega: f64,
    curvature: *const f64,
    alpha: f64,
    out_eigenvalues: *mut f64,
    out_min_real_part: *mut f64,
    out_elliptic: *mut bool,
) -> AnomalyStatus {
    guard(|| {
        let xi = read_covector(input(xi, ANOMALY_COVECTOR_LEN, "xi")?);
        let w = Herm3(read_matrix(input(omega, ANOMALY_MATRIX_LEN, "omega")?));
        let r = read_curvature(input(curvature, ANOMALY_CURVATURE_LEN, "curvature")?);
        let rep = restricted_symbol(&xi, &w, &volume(abs_omega)?, &r, alpha)?;
        if !out_eigenvalues.is_null() {
            let out = slice::from_raw_parts_mut(out_eigenvalues, 2 * rep.eigenvalues.len());
            for (i, z) in rep.eigenvalues.iter().enumerate() {
                out[2 * i] = z.re;
                out[2 * i + 1] = z.im;
            }
        }
        write(out_min_real_part, rep.min_real_part, "out_min_real_part")?;
        write(out_elliptic, rep.elliptic, "out_elliptic")
    })
}

/// Worst case of the restricted symbol over `n_dirs` seeded unit covectors.
#[no_mangle]
pub unsafe extern "C" fn anomaly_ellipticity_check(
    omega: *const f64,
    abs_omega: f64,
    curvature: *const f64,
    alpha: f64,
    n_dirs: usize,
    seed: u64,
    out_min_real_part: *mut f64,
    out_elliptic: *mut bool,
) -> AnomalyStatus {
    guard(|| {
        let w = Herm3(read_matrix(input(omega, ANOMALY_MATRIX_LEN, "omega")?));
        let r = read_curvature(input(curvature, ANOMALY_CURVATURE_LEN, "curvature")?);
        let rep = ellipticity_check(&w, &volume(abs_omega)?, &r, alpha, n_dirs, seed)?;
        write(out_min_real_part, rep.min_real_part, "out_min_real_part")?;
        write(out_elliptic, rep.elliptic, "out_elliptic")
    })
}

#[no_mangle]
pub unsafe extern "C" fn anomaly_proposition_norm(
    xi: *const f64,
    omega: *const f64,
    abs_omega: f64,
    curvature: *const f64,
    alpha: f64,
    out_norm: *mut f64,
) -> AnomalyStatus {
    guard(|| {
        let xi = read_covector(input(xi, ANOMALY_COVECTOR_LEN, "xi")?);
        let w = Herm3(read_matrix(input(omega, ANOMALY_MATRIX_LEN, "omega")?));
        let r = read_curvature(input(curvature, ANOMALY_CURVATURE_LEN, "curvature")?);
        write(out_norm, proposition_norm(&xi, &w, &volume(abs_omega)?, &r, alpha)?, "out_norm")
    })
}

// ---------------------------------------------------------------------------
// flow handles

enum Problem {
    FuYau(FuYauProblem),
    Torus(TorusProblem),
}

/// Opaque flow handle: a problem plus the result of its latest run.
pub struct AnomalyFlow {
    problem: Problem,
    run: Option<FlowRun>,
}

fn halt_code(h: &HaltReason) -> AnomalyHalt {
    match h {
        HaltReason::Completed => AnomalyHalt::Completed,
        HaltReason::StepLimit => AnomalyHalt::StepLimit,
        HaltReason::ParabolicityLoss { .. } => AnomalyHalt::ParabolicityLoss,
        HaltReason::PositivityLoss { .. } => AnomalyHalt::PositivityLoss,
        HaltReason::CflViolation { .. } => AnomalyHalt::CflViolation,
        HaltReason::NonFinite => AnomalyHalt::NonFinite,
    }
}

unsafe fn handle<'a>(h: *const AnomalyFlow) -> Result<&'a AnomalyFlow, Fail> {
    h.as_ref().ok_or_else(|| null("handle"))
}

fn finished(h: &AnomalyFlow) -> Result<&FlowRun, Fail> {
    h.run.as_ref().ok_or_else(|| Fail(AnomalyStatus::NotRun, "flow has not been run".into()))
}

fn grid(complex_dims: usize, points: usize, period: f64) -> Result<PeriodicGrid, Fail> {
    Ok(PeriodicGrid::new(complex_dims, points, period)?)
}

unsafe fn install(out: *mut *mut AnomalyFlow, problem: Problem) -> Result<(), Fail> {
    let boxed = Box::into_raw(Box::new(AnomalyFlow { problem, run: None }));
    out.write(boxed);
    Ok(())
}

/// Fu–Yau problem on a `c = 2` grid with `points⁴` samples; `f`, `mu` and the optional
/// initial datum `u0` hold one double per grid point in row-major order.
#[no_mangle]
pub unsafe extern "C" fn anomaly_fuyau_new(
    points: usize,
    period: f64,
    alpha: f64,
    f: *const f64,
    mu: *const f64,
    u0: *const f64,
    len: usize,
    out: *mut *mut AnomalyFlow,
) -> AnomalyStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = grid(2, points, period)?;
        if len != g.len() {
            return Err(Fail(AnomalyStatus::InvalidInput, format!("expected {} grid values, got {len}", g.len())));
        }
        let f = Field::new(g, input(f, len, "f")?.to_vec())?;
        let mu = Field::new(g, input(mu, len, "mu")?.to_vec())?;
        let mut prob = FuYauProblem::new(alpha, f, mu)?;
        if !u0.is_null() {
            prob = prob.with_initial(Field::new(g, slice::from_raw_parts(u0, len).to_vec())?)?;
        }
        install(out, Problem::FuYau(prob))
    })
}

/// Torus problem; `psi0` and `phi0` hold 18 doubles per grid point. A null `phi0`
/// selects the Φ₀ for which `psi0` is stationary (requires `alpha > 0`).
#[no_mangle]
pub unsafe extern "C" fn anomaly_torus_new(
    complex_dims: usize,
    points: usize,
    period: f64,
    alpha: f64,
    abs_omega: f64,
    psi0: *const f64,
    phi0: *const f64,
    len: usize,
    out: *mut *mut AnomalyFlow,
) -> AnomalyStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = grid(complex_dims, points, period)?;
        if len != g.len() * ANOMALY_MATRIX_LEN {
            return Err(Fail(
                AnomalyStatus::InvalidInput,
                format!("expected {} doubles, got {len}", g.len() * ANOMALY_MATRIX_LEN),
            ));
        }
        let field = |a: &[f64]| -> Result<Field<Psi22>, Fail> {
            Ok(Field::new(g, a.chunks_exact(ANOMALY_MATRIX_LEN).map(|c| Psi22(read_matrix(c))).collect())?)
        };
        let vol = volume(abs_omega)?;
        let psi = field(input(psi0, len, "psi0")?)?;
        let phi = if phi0.is_null() { balancing_phi0(alpha, &vol, &psi)? } else { field(slice::from_raw_parts(phi0, len))? };
        install(out, Problem::Torus(TorusProblem::from_psi(alpha, vol, phi, psi)?))
    })
}

/// Integrates from the initial datum to `t_end`, replacing any previous run.
#[no_mangle]
pub unsafe extern "C" fn anomaly_flow_run(
    h: *mut AnomalyFlow,
    t_end: f64,
    ctrl: *const AnomalyTimeControl,
    out_halt: *mut AnomalyHalt,
) -> AnomalyStatus {
    guard(|| {
        let h = h.as_mut().ok_or_else(|| null("handle"))?;
        let c = ctrl.as_ref().ok_or_else(|| null("ctrl"))?;
        let tc = TimeControl {
            cfl: c.cfl,
            fixed_dt: (c.fixed_dt > 0.0).then_some(c.fixed_dt),
            max_steps: (c.max_steps > 0).then_some(c.max_steps as usize),
            margin_min: c.margin_min,
            snapshot_every: None,
        };
        let run = match &h.problem {
            Problem::FuYau(p) => fu_yau_run(p, t_end, &tc)?,
            Problem::Torus(p) => torus_run(p, t_end, &tc)?,
        };
        let code = halt_code(&run.halt);
        h.run = Some(run);
        write(out_halt, code, "out_halt")
    })
}

/// Number of doubles in the current state: one per point (Fu–Yau) or 18 (torus).
#[no_mangle]
pub unsafe extern "C" fn anomaly_flow_state_len(h: *const AnomalyFlow, out_len: *mut usize) -> AnomalyStatus {
    guard(|| {
        let h = handle(h)?;
        let n = match &h.problem {
            Problem::FuYau(p) => p.grid().len(),
            Problem::Torus(p) => p.grid().len() * ANOMALY_MATRIX_LEN,
        };
        write(out_len, n, "out_len")
    })
}

/// Copies the final state of the latest run, plus its time, into caller buffers.
#[no_mangle]
pub unsafe extern "C" fn anomaly_flow_state(
    h: *const AnomalyFlow,
    out: *mut f64,
    len: usize,
    out_t: *mut f64,
) -> AnomalyStatus {
    guard(|| {
        let run = finished(handle(h)?)?;
        let dst = output(out, len, "out")?;
        match &run.state.payload {
            Payload::FuYau(u) => {
                if len != u.values().len() {
                    return Err(Fail(AnomalyStatus::InvalidInput, format!("buffer needs {} doubles", u.values().len())));
                }
                dst.copy_from_slice(u.values());
            }
            Payload::Torus(p) => {
                if len != p.values().len() * ANOMALY_MATRIX_LEN {
                    return Err(Fail(
                        AnomalyStatus::InvalidInput,
                        format!("buffer needs {} doubles", p.values().len() * ANOMALY_MATRIX_LEN),
                    ));
                }
                for (chunk, m) in dst.chunks_exact_mut(ANOMALY_MATRIX_LEN).zip(p.values()) {
                    write_matrix(&m.0, chunk);
                }
            }
        }
        if !out_t.is_null() {
            out_t.write(run.state.t);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn anomaly_flow_monitor_count(h: *const AnomalyFlow, out_count: *mut usize) -> AnomalyStatus {
    guard(|| {
        let n = match &finished(handle(h)?)?.state.monitors {
            Monitors::FuYau(rows) => rows.len(),
            Monitors::Torus(rows) => rows.len(),
        };
        write(out_count, n, "out_count")
    })
}

fn monitor_range(n: usize, idx: usize) -> Result<(), Fail> {
    if idx >= n {
        return Err(Fail(AnomalyStatus::InvalidInput, format!("monitor row {idx} out of range ({n} rows)")));
    }
    Ok(())
}

#[no_mangle]
pub unsafe extern "C" fn anomaly_flow_fuyau_monitor(
    h: *const AnomalyFlow,
    idx: usize,
    out: *mut AnomalyFuYauMonitor,
) -> AnomalyStatus {
    guard(|| match &finished(handle(h)?)?.state.monitors {
        Monitors::FuYau(rows) => {
            monitor_range(rows.len(), idx)?;
            let r = rows[idx];
            let row = AnomalyFuYauMonitor {
                step: r.step as u64,
                t: r.t,
                dt: r.dt,
                conservation_gap: r.conservation_gap,
                parabolicity_margin: r.parabolicity_margin,
                rhs_norm: r.rhs_norm,
                mean_exp_u: r.mean_exp_u,
                l2_norm: r.l2_norm,
            };
            write(out, row, "out")
        }
        Monitors::Torus(_) => Err(Fail(AnomalyStatus::InvalidInput, "handle holds a torus flow".into())),
    })
}

#[no_mangle]
pub unsafe extern "C" fn anomaly_flow_torus_monitor(
    h: *const AnomalyFlow,
    idx: usize,
    out: *mut AnomalyTorusMonitor,
) -> AnomalyStatus {
    guard(|| match &finished(handle(h)?)?.state.monitors {
        Monitors::Torus(rows) => {
            monitor_range(rows.len(), idx)?;
            let r = rows[idx];
            let row = AnomalyTorusMonitor {
                step: r.step as u64,
                t: r.t,
                dt: r.dt,
                balanced_residual: r.balanced_residual,
                min_eig_omega: r.min_eig_omega,
                rhs_norm: r.rhs_norm,
                stationarity: r.stationarity,
            };
            write(out, row, "out")
        }
        Monitors::FuYau(_) => Err(Fail(AnomalyStatus::InvalidInput, "handle holds a Fu–Yau flow".into())),
    })
}

/// Releases a handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn anomaly_flow_free(h: *mut AnomalyFlow) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
