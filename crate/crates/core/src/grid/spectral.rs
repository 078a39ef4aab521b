use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::PeriodicGrid;

const TILE: usize = 16;
use crate::error::{AnomalyError, Result};

/// A complex derivative direction: `Holo(j)` is `∂_j`, `Anti(k)` is `∂_{k̄}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    Holo(usize),
    Anti(usize),
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::Holo(j) | Axis::Anti(j) => j,
        }
    }
}

/// Multi-dimensional FFT over a [`PeriodicGrid`] plus the Fourier multipliers of
/// the complex derivatives. Every derivative multiplier carries the two-thirds
/// dealiasing mask, so differentiated products are alias-free.
pub struct Spectral {
    grid: PeriodicGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumber: Vec<f64>,
    keep: Vec<bool>,
}

impl Spectral {
    pub fn new(grid: PeriodicGrid) -> Self {
        let n = grid.points_per_dim();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = 2.0 * PI / grid.period();
        let cutoff = n / 3;
        let mut wavenumber = Vec::with_capacity(n);
        let mut keep = Vec::with_capacity(n);
        for m in 0..n {
            let signed = if m <= n / 2 { m as i64 } else { m as i64 - n as i64 };
            // the Nyquist mode has no well-defined odd derivative
            let k = if m == n / 2 { 0.0 } else { base * signed as f64 };
            wavenumber.push(k);
            keep.push(signed.unsigned_abs() as usize <= cutoff);
        }
        Self { grid, forward, inverse, wavenumber, keep }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, including the `1/len` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }

    /// Inverse transform without normalization.
    fn inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.grid.len());
        let n = self.grid.points_per_dim();
        let d = self.grid.real_axes();
        for a in 0..d {
            let stride = n.pow((d - 1 - a) as u32);
            if stride == 1 {
                data.par_chunks_mut(n * 64).for_each_init(
                    || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                    |scratch, c| fft.process_with_scratch(c, scratch),
                );
                continue;
            }
            // strided axis: gather TILE neighbouring lines at a time so reads stay contiguous
            let tile = TILE.min(stride);
            let block = n * stride;
            data.par_chunks_mut(block).for_each_init(
                || (vec![Complex64::new(0.0, 0.0); n * tile], vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()]),
                |(lines, scratch), chunk| {
                    for r0 in (0..stride).step_by(tile) {
                        for m in 0..n {
                            let row = &chunk[m * stride + r0..m * stride + r0 + tile];
                            for (r, v) in row.iter().enumerate() {
                                lines[r * n + m] = *v;
                            }
                        }
                        fft.process_with_scratch(lines, scratch);
                        for m in 0..n {
                            let row = &mut chunk[m * stride + r0..m * stride + r0 + tile];
                            for (r, v) in row.iter_mut().enumerate() {
                                *v = lines[r * n + m];
                            }
                        }
                    }
                },
            );
        }
    }

    pub fn check_axis(&self, axis: Axis) -> Result<()> {
        if axis.index() >= self.grid.complex_dims() {
            return Err(AnomalyError::InactiveAxis(format!(
                "{axis:?} on a grid with {} active complex coordinates",
                self.grid.complex_dims()
            )));
        }
        Ok(())
    }

    /// Fourier multiplier of `axis` at flat mode index `flat`:
    /// `∂_j ↦ (i k_x + k_y)/2`, `∂_{j̄} ↦ (i k_x − k_y)/2`, times the dealiasing mask.
    pub fn multiplier(&self, axis: Axis, flat: usize) -> Complex64 {
        let idx = self.grid.lattice_index(flat);
        if !self.retained_index(&idx) {
            return Complex64::new(0.0, 0.0);
        }
        self.raw_multiplier(axis, &idx)
    }

    /// Multiplier of the composition of several derivatives at one mode.
    pub fn multiplier_product(&self, axes: &[Axis], flat: usize) -> Complex64 {
        let idx = self.grid.lattice_index(flat);
        if !self.retained_index(&idx) {
            return Complex64::new(0.0, 0.0);
        }
        axes.iter().fold(Complex64::new(1.0, 0.0), |acc, &ax| acc * self.raw_multiplier(ax, &idx))
    }

    fn raw_multiplier(&self, axis: Axis, idx: &[usize; 4]) -> Complex64 {
        let j = axis.index();
        let kx = self.wavenumber[idx[2 * j]];
        let ky = self.wavenumber[idx[2 * j + 1]];
        match axis {
            Axis::Holo(_) => Complex64::new(ky, kx) * 0.5,
            Axis::Anti(_) => Complex64::new(-ky, kx) * 0.5,
        }
    }

    fn retained_index(&self, idx: &[usize; 4]) -> bool {
        idx[..self.grid.real_axes()].iter().all(|&m| self.keep[m])
    }

    /// True if the mode survives two-thirds dealiasing.
    pub fn retained(&self, flat: usize) -> bool {
        self.retained_index(&self.grid.lattice_index(flat))
    }

    /// Flat index of the mode `-k`.
    pub fn negate(&self, flat: usize) -> usize {
        let n = self.grid.points_per_dim();
        let idx = self.grid.lattice_index(flat);
        idx[..self.grid.real_axes()].iter().fold(0, |acc, &m| acc * n + (n - m) % n)
    }

    /// Euclidean `|k|²` of a mode.
    pub fn wavenumber_sq(&self, flat: usize) -> f64 {
        let idx = self.grid.lattice_index(flat);
        idx[..self.grid.real_axes()].iter().map(|&m| self.wavenumber[m].powi(2)).sum()
    }

    pub fn to_spectral_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.par_iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn to_spectral(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        buf
    }

    /// Applies the derivative composition `axes` to spectral data and returns
    /// physical-space values.
    pub fn apply(&self, hat: &[Complex64], axes: &[Axis]) -> Vec<Complex64> {
        let n = self.grid.points_per_dim();
        let last = self.grid.real_axes() - 1;
        let scale = Complex64::new(1.0 / hat.len() as f64, 0.0);
        let mut out = vec![Complex64::new(0.0, 0.0); hat.len()];
        out.par_chunks_mut(n)
            .zip(hat.par_chunks(n))
            .enumerate()
            .with_min_len(64)
            .for_each(|(row, (o, h))| {
                let mut idx = self.grid.lattice_index(row * n);
                if !idx[..last].iter().all(|&m| self.keep[m]) {
                    return;
                }
                for m in (0..n).filter(|&m| self.keep[m]) {
                    idx[last] = m;
                    let mult = axes.iter().fold(scale, |acc, &ax| acc * self.raw_multiplier(ax, &idx));
                    o[m] = h[m] * mult;
                }
            });
        self.inverse_unnormalized(&mut out);
        out
    }
}
