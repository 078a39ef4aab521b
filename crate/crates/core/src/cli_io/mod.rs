//! Command-line orchestration: configuration, verification suites, symbol sweeps and
//! flow runs with their on-disk artifacts.

pub mod config;
pub mod output;
pub mod sampling;
pub mod symbol;
pub mod verify;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{Command, RunConfig};
pub use output::FlowSummary;
pub use symbol::{SymbolInput, SymbolRow, Threshold};
pub use verify::{run_suites, VerifyHooks, VerifyReport};

use crate::error::{AnomalyError, Result};
use crate::flow::{balancing_phi0, fu_yau_run, torus_run, FuYauProblem, TimeControl, TorusProblem};
use crate::pointwise::{Herm3, VolumeData};
use config::{Phi0Spec, TimeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    VerifyFailure = 1,
    Halted = 2,
    InputError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// One CLI invocation after argument parsing.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Sizes the global worker pool from `ANOMALY_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("ANOMALY_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| AnomalyError::Input(format!("ANOMALY_THREADS must be a positive integer, got {raw:?}")))?;
    // a pool that is already initialized keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn out_dir(cfg: &RunConfig, inv_out: Option<&Path>) -> PathBuf {
    inv_out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn prefix(cfg: &RunConfig, command: Command) -> String {
    cfg.output.prefix.clone().unwrap_or_else(|| command.name().replace('-', "_"))
}

pub fn time_control(spec: &TimeSpec) -> TimeControl {
    TimeControl {
        cfl: spec.cfl,
        fixed_dt: spec.dt,
        max_steps: spec.max_steps,
        margin_min: spec.margin_min,
        snapshot_every: spec.snapshot_every,
    }
}

pub fn run_verify(cfg: &RunConfig, dir: &Path, hooks: &VerifyHooks) -> Result<VerifyReport> {
    let report = run_suites(cfg.seed, &cfg.verify, &cfg.tolerances, hooks);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{}_report.json", prefix(cfg, Command::Verify))), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub kernel_eigenvalue: f64,
    pub rows: Vec<SymbolRow>,
    pub threshold: Option<Threshold>,
}

pub fn symbol_input(cfg: &RunConfig) -> Result<SymbolInput> {
    let spec = cfg.symbol.as_ref().ok_or_else(|| AnomalyError::Input("config has no symbol section".into()))?;
    let vol = VolumeData::new(spec.abs_omega)?;
    let omega = match &spec.omega {
        Some(o) => o.resolve(&vol)?,
        None => Herm3::identity(),
    };
    Ok(SymbolInput { omega, vol, curvature: spec.curvature.resolve()?, directions: spec.directions, seed: cfg.seed })
}

pub fn run_symbol(cfg: &RunConfig, dir: &Path) -> Result<SymbolSummary> {
    let input = symbol_input(cfg)?;
    let spec = cfg.symbol.as_ref().expect("checked by symbol_input");
    let rows = input.sweep(&spec.alphas)?;
    let threshold = spec.bisect.as_ref().map(|b| input.bisect(b)).transpose()?;
    let summary = SymbolSummary {
        schema_version: config::SCHEMA_VERSION,
        seed: cfg.seed,
        kernel_eigenvalue: input.kernel_eigenvalue()?,
        rows,
        threshold,
    };
    let p = prefix(cfg, Command::Symbol);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{p}.csv")), output::symbol_csv(&summary.rows))?;
    std::fs::write(dir.join(format!("{p}_summary.json")), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

pub fn fu_yau_problem(cfg: &RunConfig) -> Result<FuYauProblem> {
    let spec = cfg.fuyau.as_ref().ok_or_else(|| AnomalyError::Input("config has no fuyau section".into()))?;
    let grid = cfg.grid()?;
    let prob = FuYauProblem::new(spec.alpha, spec.f.materialize(&grid)?, spec.mu.materialize(&grid)?)?;
    match (&spec.initial, &spec.perturbation) {
        (Some(_), Some(_)) => Err(AnomalyError::Input("give either initial or perturbation, not both".into())),
        (Some(u0), None) => prob.with_initial(u0.materialize(&grid)?),
        (None, Some(p)) => Ok(prob.with_perturbation(p.epsilon, p.mode)),
        (None, None) => Ok(prob),
    }
}

pub fn torus_problem(cfg: &RunConfig) -> Result<TorusProblem> {
    let spec = cfg.torus.as_ref().ok_or_else(|| AnomalyError::Input("config has no torus section".into()))?;
    let grid = cfg.grid()?;
    let vol = VolumeData::new(spec.abs_omega)?;
    let psi0 = spec.psi.materialize(&grid)?;
    let phi0 = match &spec.phi0 {
        Phi0Spec::Keyword(config::Phi0Keyword::Balancing) => balancing_phi0(spec.alpha, &vol, &psi0)?,
        Phi0Spec::Field(f) => f.materialize(&grid)?,
    };
    TorusProblem::from_psi(spec.alpha, vol, phi0, psi0)
}

pub fn run_flow(cfg: &RunConfig, command: Command, dir: &Path) -> Result<FlowSummary> {
    let ctrl = time_control(&cfg.time);
    let run = match command {
        Command::FlowFuyau => fu_yau_run(&fu_yau_problem(cfg)?, cfg.time.t_end, &ctrl)?,
        Command::FlowTorus => torus_run(&torus_problem(cfg)?, cfg.time.t_end, &ctrl)?,
        other => return Err(AnomalyError::Input(format!("{} is not a flow command", other.name()))),
    };
    output::write_flow(dir, &prefix(cfg, command), command.name(), cfg.seed, &run)
}

fn load(inv: &Invocation) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&inv.config)?;
    if let Some(c) = cfg.command {
        if c != inv.command {
            return Err(AnomalyError::Input(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                inv.command.name()
            )));
        }
    }
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs one invocation, reporting on stdout/stderr, and maps the outcome to an exit status.
pub fn execute(inv: &Invocation, hooks: &VerifyHooks) -> ExitStatus {
    let input_error = |e: AnomalyError| {
        eprintln!("error: {e}");
        ExitStatus::InputError
    };
    let cfg = match load(inv) {
        Ok(c) => c,
        Err(e) => return input_error(e),
    };
    let dir = out_dir(&cfg, inv.out.as_deref());
    match inv.command {
        Command::Verify => match run_verify(&cfg, &dir, hooks) {
            Ok(report) => {
                for s in &report.suites {
                    println!(
                        "{:<24} {:>5} trials  max residual {:.3e}  tol {:.1e}  {}",
                        s.name,
                        s.trials,
                        s.max_residual,
                        s.tolerance,
                        if s.passed { "ok" } else { "FAIL" }
                    );
                }
                if report.passed {
                    ExitStatus::Success
                } else {
                    for s in report.failing() {
                        eprintln!("failed: {} ({}), {} of {} trials", s.name, s.identity, s.failures, s.trials);
                    }
                    ExitStatus::VerifyFailure
                }
            }
            Err(e) => input_error(e),
        },
        Command::Symbol => match run_symbol(&cfg, &dir) {
            Ok(summary) => {
                print!("{}", output::symbol_csv(&summary.rows));
                if let Some(t) = summary.threshold {
                    println!("threshold in [{}, {}]", t.elliptic_below, t.degenerate_above);
                }
                ExitStatus::Success
            }
            Err(e) => input_error(e),
        },
        Command::FlowFuyau | Command::FlowTorus => match run_flow(&cfg, inv.command, &dir) {
            Ok(summary) => {
                println!("{} steps to t = {}: {:?}", summary.steps, summary.t, summary.halt);
                if summary.halt.is_breakdown() {
                    eprintln!("flow halted: {:?}", summary.halt);
                    ExitStatus::Halted
                } else {
                    ExitStatus::Success
                }
            }
            Err(e) => input_error(e),
        },
    }
}
