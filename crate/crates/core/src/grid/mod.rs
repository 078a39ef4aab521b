//! Periodic lattice calculus for fields depending on one or two complex coordinates.
//!
//! A grid with `c` active complex coordinates has `2c` real axes ordered
//! `(x₁, y₁, x₂, y₂)`, each with `N` points over period `L`; values are stored
//! row-major with the last axis fastest. Fields are constant along the inactive
//! directions of the 3-fold, but matrix-valued fields keep all three indices.

mod calculus;
mod snapshot;
mod spectral;

pub use calculus::{
    check_positive_field, chern_curvature, d_residual_22, diff, i_ddbar_11, min_eigenvalue, tr_r_wedge_r, Calculus,
};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotKind, SnapshotValue};
pub use spectral::{Axis, Spectral};

use crate::error::{AnomalyError, Result};
use crate::linearize::CurvTensor;
use crate::pointwise::{Herm3, Psi22};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicGrid {
    complex_dims: usize,
    points_per_dim: usize,
    period: f64,
}

impl PeriodicGrid {
    pub fn new(complex_dims: usize, points_per_dim: usize, period: f64) -> Result<Self> {
        if !(1..=2).contains(&complex_dims) {
            return Err(AnomalyError::Input(format!("complex_dims must be 1 or 2, got {complex_dims}")));
        }
        if points_per_dim < 8 || !points_per_dim.is_power_of_two() {
            return Err(AnomalyError::Input(format!(
                "points per axis must be a power of two >= 8, got {points_per_dim}"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(AnomalyError::Input(format!("period must be positive, got {period}")));
        }
        Ok(Self { complex_dims, points_per_dim, period })
    }

    pub fn complex_dims(&self) -> usize {
        self.complex_dims
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn real_axes(&self) -> usize {
        2 * self.complex_dims
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.real_axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_dim as f64
    }

    /// Integer lattice coordinates of a flat index, one per real axis.
    pub fn lattice_index(&self, flat: usize) -> [usize; 4] {
        // points per axis is a power of two
        let d = self.real_axes();
        let shift = self.points_per_dim.trailing_zeros() as usize;
        let mask = self.points_per_dim - 1;
        let mut out = [0usize; 4];
        for (a, slot) in out.iter_mut().enumerate().take(d) {
            *slot = (flat >> (shift * (d - 1 - a))) & mask;
        }
        out
    }

    /// Real coordinates `(x₁, y₁, x₂, y₂)` of a flat index; unused axes are zero.
    pub fn coordinates(&self, flat: usize) -> [f64; 4] {
        let idx = self.lattice_index(flat);
        let h = self.spacing();
        let mut out = [0.0; 4];
        for a in 0..self.real_axes() {
            out[a] = idx[a] as f64 * h;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: PeriodicGrid,
    values: Vec<T>,
}

impl<T: Clone> Field<T> {
    pub fn new(grid: PeriodicGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(AnomalyError::Input(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: PeriodicGrid, value: T) -> Self {
        Self { values: vec![value; grid.len()], grid }
    }

    pub fn from_fn<F: FnMut([f64; 4]) -> T>(grid: PeriodicGrid, mut f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coordinates(i))).collect();
        Self { grid, values }
    }

}

impl<T> Field<T> {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> Field<U> {
        Field { grid: self.grid, values: self.values.iter().map(f).collect() }
    }
}

impl Field<f64> {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Root-mean-square over the grid.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

pub type ScalarField = Field<f64>;
pub type OmegaField = Field<Herm3>;
pub type PsiField = Field<Psi22>;
pub type CurvField = Field<CurvTensor>;

/// Root-mean-square Frobenius norm of a matrix field.
pub fn rms_norm_psi(f: &PsiField) -> f64 {
    let s: f64 = f.values().iter().map(|p| p.norm().powi(2)).sum();
    (s / f.values().len() as f64).sqrt()
}
