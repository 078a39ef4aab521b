//! Monitor CSV, summary JSON and snapshot emission for flow runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::symbol::SymbolRow;
use crate::error::Result;
use crate::flow::{FlowRun, HaltReason, Monitors, Snapshot};
use crate::grid::write_snapshot;

pub const FUYAU_COLUMNS: &str = "step,t,dt,conservation_gap,parabolicity_margin,rhs_norm,mean_exp_u,l2_norm";
pub const TORUS_COLUMNS: &str = "step,t,dt,balanced_residual,min_eig_omega,rhs_norm,stationarity";
pub const SYMBOL_COLUMNS: &str = "alpha,min_real_part,elliptic,proposition_norm,proposition_margin";

/// 17 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn monitor_csv(monitors: &Monitors) -> String {
    let mut out = String::new();
    match monitors {
        Monitors::FuYau(rows) => {
            out.push_str(FUYAU_COLUMNS);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.step,
                    sci(r.t),
                    sci(r.dt),
                    sci(r.conservation_gap),
                    sci(r.parabolicity_margin),
                    sci(r.rhs_norm),
                    sci(r.mean_exp_u),
                    sci(r.l2_norm)
                );
            }
        }
        Monitors::Torus(rows) => {
            out.push_str(TORUS_COLUMNS);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.step,
                    sci(r.t),
                    sci(r.dt),
                    sci(r.balanced_residual),
                    sci(r.min_eig_omega),
                    sci(r.rhs_norm),
                    sci(r.stationarity)
                );
            }
        }
    }
    out
}

pub fn symbol_csv(rows: &[SymbolRow]) -> String {
    let mut out = String::from(SYMBOL_COLUMNS);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sci(r.alpha),
            sci(r.min_real_part),
            r.elliptic,
            sci(r.proposition_norm),
            sci(r.proposition_margin)
        );
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowSummary {
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub halt: HaltReason,
    pub steps: usize,
    pub t: f64,
    pub final_monitor: serde_json::Value,
    pub monitor_csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub final_snapshot: PathBuf,
    pub halt_snapshot: Option<PathBuf>,
}

fn file_name(p: &Path) -> PathBuf {
    p.file_name().map(PathBuf::from).unwrap_or_else(|| p.to_path_buf())
}

fn emit_snapshot(dir: &Path, name: String, snap: &Snapshot) -> Result<PathBuf> {
    let path = dir.join(name);
    write_snapshot(&path, &snap.payload.to_snapshot())?;
    Ok(file_name(&path))
}

/// Writes every artifact of `run` into `dir`; paths in the summary are relative to `dir`.
pub fn write_flow(dir: &Path, prefix: &str, command: &'static str, seed: u64, run: &FlowRun) -> Result<FlowSummary> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{prefix}_monitor.csv"));
    std::fs::write(&csv, monitor_csv(&run.state.monitors))?;
    let snapshots = run
        .snapshots
        .iter()
        .map(|s| emit_snapshot(dir, format!("{prefix}_step{:08}.anmf", s.step), s))
        .collect::<Result<Vec<_>>>()?;
    let final_snap = Snapshot { step: run.state.step, t: run.state.t, payload: run.state.payload.clone() };
    let final_snapshot = emit_snapshot(dir, format!("{prefix}_final.anmf"), &final_snap)?;
    let halt_snapshot = run
        .halt_snapshot
        .as_ref()
        .map(|s| emit_snapshot(dir, format!("{prefix}_halt.anmf"), s))
        .transpose()?;
    let final_monitor = match &run.state.monitors {
        Monitors::FuYau(rows) => serde_json::to_value(rows.last())?,
        Monitors::Torus(rows) => serde_json::to_value(rows.last())?,
    };
    let summary = FlowSummary {
        schema_version: super::config::SCHEMA_VERSION,
        command,
        seed,
        halt: run.halt.clone(),
        steps: run.state.step,
        t: run.state.t,
        final_monitor,
        monitor_csv: file_name(&csv),
        snapshots,
        final_snapshot,
        halt_snapshot,
    };
    std::fs::write(dir.join(format!("{prefix}_summary.json")), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(sci(0.1), "1.0000000000000001e-1");
        assert_eq!(sci(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(sci(-2.5), "-2.5000000000000000e0");
    }
}
