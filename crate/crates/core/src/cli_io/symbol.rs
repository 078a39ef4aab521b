//! α′ sweeps of the restricted symbol and bisection of the ellipticity threshold.

use serde::Serialize;

use super::config::BisectSpec;
use crate::error::{AnomalyError, Result};
use crate::linearize::{ellipticity_check, proposition_norm, sample_directions, CurvTensor};
use crate::pointwise::{norm_omega, Herm3, VolumeData};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymbolRow {
    pub alpha: f64,
    pub min_real_part: f64,
    pub elliptic: bool,
    /// Largest proposition norm over the sampled unit covectors.
    pub proposition_norm: f64,
    /// `min_ξ (|ξ|² − proposition_norm)`; positive values certify ellipticity.
    pub proposition_margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Threshold {
    /// Largest probed α′ with an elliptic verdict.
    pub elliptic_below: f64,
    /// Smallest probed α′ without one.
    pub degenerate_above: f64,
}

pub struct SymbolInput {
    pub omega: Herm3,
    pub vol: VolumeData,
    pub curvature: CurvTensor,
    pub directions: usize,
    pub seed: u64,
}

impl SymbolInput {
    /// Value `|ξ|²/(2‖Ω‖)` taken by every eigenvalue at α′ = 0 for unit ξ.
    pub fn kernel_eigenvalue(&self) -> Result<f64> {
        Ok(0.5 / norm_omega(&self.omega, &self.vol)?)
    }

    pub fn row(&self, alpha: f64) -> Result<SymbolRow> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(AnomalyError::Input(format!("α′ must be finite and nonnegative, got {alpha}")));
        }
        let rep = ellipticity_check(&self.omega, &self.vol, &self.curvature, alpha, self.directions, self.seed)?;
        let mut worst_norm: f64 = 0.0;
        let mut margin = f64::INFINITY;
        for xi in sample_directions(&self.omega, self.directions, self.seed) {
            let p = proposition_norm(&xi, &self.omega, &self.vol, &self.curvature, alpha)?;
            worst_norm = worst_norm.max(p);
            margin = margin.min(xi.norm_sq(&self.omega) - p);
        }
        Ok(SymbolRow {
            alpha,
            min_real_part: rep.min_real_part,
            elliptic: rep.elliptic,
            proposition_norm: worst_norm,
            proposition_margin: margin,
        })
    }

    pub fn sweep(&self, alphas: &[f64]) -> Result<Vec<SymbolRow>> {
        alphas.iter().map(|&a| self.row(a)).collect()
    }

    fn verdict(&self, alpha: f64) -> Result<bool> {
        Ok(ellipticity_check(&self.omega, &self.vol, &self.curvature, alpha, self.directions, self.seed)?.elliptic)
    }

    /// Brackets the α′ at which the verdict flips, to width `spec.tol`.
    pub fn bisect(&self, spec: &BisectSpec) -> Result<Threshold> {
        let (mut lo, mut hi) = (spec.lo, spec.hi);
        if !(0.0 <= lo && lo < hi && hi.is_finite() && spec.tol > 0.0) {
            return Err(AnomalyError::Input(format!("bad bisection bracket [{lo}, {hi}] with tol {}", spec.tol)));
        }
        if !self.verdict(lo)? || self.verdict(hi)? {
            return Err(AnomalyError::Input(format!(
                "verdict does not flip on [{lo}, {hi}]: need elliptic at the lower end only"
            )));
        }
        while hi - lo > spec.tol {
            let mid = 0.5 * (lo + hi);
            if self.verdict(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Threshold { elliptic_below: lo, degenerate_above: hi })
    }
}
