//! JSON run configuration (schema version 1) and materialization of field specs.

use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AnomalyError, Result};
use crate::grid::{read_snapshot, Calculus, Field, OmegaField, PeriodicGrid, PsiField, ScalarField, SnapshotValue};
use crate::linearize::CurvTensor;
use crate::pointwise::{omega_from_psi, Herm3, Psi22, VolumeData};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Symbol,
    FlowFuyau,
    FlowTorus,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Symbol => "symbol",
            Command::FlowFuyau => "flow-fuyau",
            Command::FlowTorus => "flow-torus",
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Optional; when present it must agree with the subcommand.
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
    pub symbol: Option<SymbolSpec>,
    pub fuyau: Option<FuYauSpec>,
    pub torus: Option<TorusSpec>,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub root: f64,
    pub star: f64,
    pub variation: f64,
    pub kernel: f64,
    pub symbol: f64,
    pub coupled: f64,
    pub wedge: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { root: 1e-10, star: 1e-12, variation: 1e-4, kernel: 1e-10, symbol: 1e-10, coupled: 1e-10, wedge: 1e-12 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub cofactor: usize,
    pub roundtrip: usize,
    pub star: usize,
    pub variation: usize,
    pub kernel: usize,
    pub symbol: usize,
    pub coupled: usize,
    /// Covectors sampled per draw in the symbol suite.
    pub directions: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { cofactor: 50, roundtrip: 1000, star: 200, variation: 100, kernel: 200, symbol: 500, coupled: 60, directions: 8 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub complex_dims: usize,
    pub points: usize,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    2.0 * std::f64::consts::PI
}

impl GridSpec {
    pub fn build(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.complex_dims, self.points, self.period)
    }
}

/// A complex number written as `x` or `[re, im]`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Diag { diag: [f64; 3] },
    Full([[ComplexValue; 3]; 3]),
}

impl MatrixSpec {
    pub fn matrix(&self) -> Matrix3<Complex64> {
        match self {
            MatrixSpec::Diag { diag } => Matrix3::from_fn(|r, c| if r == c { Complex64::new(diag[r], 0.0) } else { Complex64::new(0.0, 0.0) }),
            MatrixSpec::Full(rows) => Matrix3::from_fn(|r, c| rows[r][c].value()),
        }
    }

    pub fn hermitian(&self, what: &str) -> Result<Matrix3<Complex64>> {
        let m = self.matrix();
        let scale = 1.0 + m.norm();
        if (m - m.adjoint()).norm() > 1e-12 * scale || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(AnomalyError::Input(format!("{what} must be a finite Hermitian matrix")));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarMode {
    pub k: [i64; 4],
    pub amp: ComplexValue,
}

/// `{"constant": c}` or `{"modes": [...], "constant": c}`; value `c + Σ Re(amp e^{ik·x})`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub modes: Vec<ScalarMode>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixMode {
    pub k: [i64; 4],
    pub amp: MatrixSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiSpec {
    Constant(MatrixSpec),
    /// `base + Σ (A e^{ik·x} + Aᴴ e^{-ik·x})/2`.
    Modes { base: MatrixSpec, modes: Vec<MatrixMode> },
    /// `base + i∂∂̄χ` with `χ` given by modes as above; closed by construction.
    Ddbar { base: MatrixSpec, modes: Vec<MatrixMode> },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi0Keyword {
    /// Chosen so that the initial state is stationary.
    Balancing,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Phi0Spec {
    Keyword(Phi0Keyword),
    Field(PsiSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub epsilon: f64,
    pub mode: [i64; 4],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuYauSpec {
    pub alpha: f64,
    pub f: ScalarSpec,
    pub mu: ScalarSpec,
    pub initial: Option<ScalarSpec>,
    pub perturbation: Option<Perturbation>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSpec {
    pub alpha: f64,
    #[serde(default = "one")]
    pub abs_omega: f64,
    pub psi: PsiSpec,
    pub phi0: Phi0Spec,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureSpec {
    Zero,
    TraceModel(f64),
    /// `entries[k][j]` is the endomorphism `R_{k̄j}`.
    Entries(Vec<Vec<MatrixSpec>>),
    Snapshot { path: PathBuf, point: usize },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Snapshot { snapshot: PathBuf, point: usize },
    Matrix(MatrixSpec),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_bisect_tol")]
    pub tol: f64,
}

fn default_bisect_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub omega: Option<OmegaSpec>,
    #[serde(default = "one")]
    pub abs_omega: f64,
    pub curvature: CurvatureSpec,
    pub alphas: Vec<f64>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    pub bisect: Option<BisectSpec>,
}

fn default_directions() -> usize {
    64
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    pub cfl: f64,
    pub dt: Option<f64>,
    pub max_steps: Option<usize>,
    pub margin_min: f64,
    pub snapshot_every: Option<usize>,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { t_end: 1.0, cfl: crate::flow::DEFAULT_CFL, dt: None, max_steps: None, margin_min: 0.0, snapshot_every: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub prefix: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| AnomalyError::Input(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(AnomalyError::Input(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AnomalyError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        self.grid.as_ref().ok_or_else(|| AnomalyError::Input("config has no grid section".into()))?.build()
    }
}

fn check_mode(grid: &PeriodicGrid, k: &[i64; 4]) -> Result<()> {
    let cutoff = (grid.points_per_dim() / 3) as i64;
    for (axis, &m) in k.iter().enumerate() {
        if axis >= grid.real_axes() && m != 0 {
            return Err(AnomalyError::Input(format!("mode {k:?} uses inactive axis {axis}")));
        }
        if m.abs() > cutoff {
            return Err(AnomalyError::Input(format!("mode {k:?} exceeds the dealiasing cutoff {cutoff}")));
        }
    }
    Ok(())
}

fn phase(grid: &PeriodicGrid, k: &[i64; 4], x: &[f64; 4]) -> Complex64 {
    let scale = 2.0 * std::f64::consts::PI / grid.period();
    let theta: f64 = (0..4).map(|a| k[a] as f64 * scale * x[a]).sum();
    Complex64::from_polar(1.0, theta)
}

impl ScalarSpec {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, modes: Vec::new() }
    }

    pub fn materialize(&self, grid: &PeriodicGrid) -> Result<ScalarField> {
        if !self.constant.is_finite() {
            return Err(AnomalyError::Input("scalar constant must be finite".into()));
        }
        for m in &self.modes {
            check_mode(grid, &m.k)?;
        }
        Ok(Field::from_fn(*grid, |x| {
            self.constant + self.modes.iter().map(|m| (m.amp.value() * phase(grid, &m.k, &x)).re).sum::<f64>()
        }))
    }
}

fn matrix_modes(grid: &PeriodicGrid, base: &MatrixSpec, modes: &[MatrixMode]) -> Result<Field<Matrix3<Complex64>>> {
    let base = base.hermitian("base matrix")?;
    let amps: Vec<([i64; 4], Matrix3<Complex64>)> = modes
        .iter()
        .map(|m| check_mode(grid, &m.k).map(|_| (m.k, m.amp.matrix())))
        .collect::<Result<_>>()?;
    let half = Complex64::new(0.5, 0.0);
    Ok(Field::from_fn(*grid, |x| {
        let mut m = base;
        for (k, a) in &amps {
            let p = phase(grid, k, &x);
            m += (a * p + a.adjoint() * p.conj()) * half;
        }
        m
    }))
}

impl PsiSpec {
    pub fn materialize(&self, grid: &PeriodicGrid) -> Result<PsiField> {
        match self {
            PsiSpec::Constant(m) => Ok(Field::constant(*grid, Psi22(m.hermitian("constant matrix")?))),
            PsiSpec::Modes { base, modes } => Ok(matrix_modes(grid, base, modes)?.map(|m| Psi22(*m))),
            PsiSpec::Ddbar { base, modes } => {
                let base = base.hermitian("base matrix")?;
                let zero = MatrixSpec::Diag { diag: [0.0; 3] };
                let chi: OmegaField = matrix_modes(grid, &zero, modes)?.map(|m| Herm3(*m));
                let d = Calculus::new(*grid).i_ddbar_11(&chi)?;
                Ok(d.map(|p| Psi22(base + p.0)))
            }
        }
    }
}

fn snapshot_point<T: Clone>(field: &Field<T>, point: usize) -> Result<T> {
    field
        .values()
        .get(point)
        .cloned()
        .ok_or_else(|| AnomalyError::Input(format!("point {point} outside the snapshot grid ({} points)", field.values().len())))
}

impl OmegaSpec {
    pub fn resolve(&self, vol: &VolumeData) -> Result<Herm3> {
        match self {
            OmegaSpec::Matrix(m) => Ok(Herm3(m.hermitian("ω")?)),
            OmegaSpec::Snapshot { snapshot, point } => match read_snapshot(snapshot)? {
                SnapshotValue::Omega(f) => snapshot_point(&f, *point),
                SnapshotValue::Psi(f) => Ok(omega_from_psi(&snapshot_point(&f, *point)?, vol)?.0),
                other => Err(AnomalyError::Input(format!("snapshot of kind {:?} does not hold a metric", other.kind()))),
            },
        }
    }
}

impl CurvatureSpec {
    pub fn resolve(&self) -> Result<CurvTensor> {
        match self {
            CurvatureSpec::Zero => Ok(CurvTensor::zero()),
            CurvatureSpec::TraceModel(l) => Ok(CurvTensor::trace_model(*l)),
            CurvatureSpec::Entries(rows) => {
                if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                    return Err(AnomalyError::Input("curvature entries must be a 3×3 array of matrices".into()));
                }
                let mut r = CurvTensor::zero();
                for k in 0..3 {
                    for j in 0..3 {
                        r.entries[k][j] = rows[k][j].matrix();
                    }
                }
                Ok(r)
            }
            CurvatureSpec::Snapshot { path, point } => match read_snapshot(path)? {
                SnapshotValue::Curvature(f) => snapshot_point(&f, *point),
                other => Err(AnomalyError::Input(format!("snapshot of kind {:?} is not a curvature field", other.kind()))),
            },
        }
    }
}
