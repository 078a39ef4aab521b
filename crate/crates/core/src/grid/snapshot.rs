//! `ANMF` binary snapshots: magic, version, kind tag, grid header, then
//! little-endian `f64` data with complex values interleaved as (re, im).

use std::fs;
use std::path::Path;

use nalgebra::Matrix3;
use num_complex::Complex64;

use super::{Field, PeriodicGrid};
use crate::error::{AnomalyError, Result};
use crate::linearize::CurvTensor;
use crate::pointwise::{Herm3, Psi22};

const MAGIC: &[u8; 4] = b"ANMF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum SnapshotKind {
    Real = 0,
    Complex = 1,
    Omega = 2,
    Psi = 3,
    Curvature = 4,
}

impl SnapshotKind {
    fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            0 => Self::Real,
            1 => Self::Complex,
            2 => Self::Omega,
            3 => Self::Psi,
            4 => Self::Curvature,
            _ => return Err(AnomalyError::Snapshot(format!("unknown component kind {tag}"))),
        })
    }

    /// Number of f64 values stored per grid point.
    fn width(self) -> usize {
        match self {
            Self::Real => 1,
            Self::Complex => 2,
            Self::Omega | Self::Psi => 18,
            Self::Curvature => 162,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SnapshotValue {
    Real(Field<f64>),
    Complex(Field<Complex64>),
    Omega(Field<Herm3>),
    Psi(Field<Psi22>),
    Curvature(Field<CurvTensor>),
}

impl SnapshotValue {
    pub fn kind(&self) -> SnapshotKind {
        match self {
            Self::Real(_) => SnapshotKind::Real,
            Self::Complex(_) => SnapshotKind::Complex,
            Self::Omega(_) => SnapshotKind::Omega,
            Self::Psi(_) => SnapshotKind::Psi,
            Self::Curvature(_) => SnapshotKind::Curvature,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        match self {
            Self::Real(f) => f.grid(),
            Self::Complex(f) => f.grid(),
            Self::Omega(f) => f.grid(),
            Self::Psi(f) => f.grid(),
            Self::Curvature(f) => f.grid(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = self.grid();
        let kind = self.kind();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * kind.width() * g.len());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, kind as u32, g.complex_dims() as u32, g.points_per_dim() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&g.period().to_le_bytes());
        let mut push = |x: f64| out.extend_from_slice(&x.to_le_bytes());
        let push_c = |z: Complex64, push: &mut dyn FnMut(f64)| {
            push(z.re);
            push(z.im);
        };
        match self {
            Self::Real(f) => f.values().iter().for_each(|&v| push(v)),
            Self::Complex(f) => f.values().iter().for_each(|&z| push_c(z, &mut push)),
            Self::Omega(f) => f.values().iter().for_each(|m| push_matrix(&m.0, &mut push)),
            Self::Psi(f) => f.values().iter().for_each(|m| push_matrix(&m.0, &mut push)),
            Self::Curvature(f) => f.values().iter().for_each(|t| {
                t.entries.iter().flatten().for_each(|m| push_matrix(m, &mut push));
            }),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(AnomalyError::Snapshot("missing ANMF header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
        let version = word(0);
        if version != VERSION {
            return Err(AnomalyError::Snapshot(format!("unsupported version {version}")));
        }
        let kind = SnapshotKind::from_tag(word(1))?;
        let period = f64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes"));
        let grid = PeriodicGrid::new(word(2) as usize, word(3) as usize, period)
            .map_err(|e| AnomalyError::Snapshot(format!("bad grid header: {e}")))?;
        let expected = HEADER_LEN + 8 * kind.width() * grid.len();
        if bytes.len() != expected {
            return Err(AnomalyError::Snapshot(format!(
                "payload length {} does not match header (expected {expected})",
                bytes.len()
            )));
        }
        let data: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let w = kind.width();
        let points = data.chunks_exact(w);
        Ok(match kind {
            SnapshotKind::Real => Self::Real(Field { grid, values: data }),
            SnapshotKind::Complex => {
                Self::Complex(Field { grid, values: points.map(|c| Complex64::new(c[0], c[1])).collect() })
            }
            SnapshotKind::Omega => Self::Omega(Field { grid, values: points.map(|c| Herm3(read_matrix(c))).collect() }),
            SnapshotKind::Psi => Self::Psi(Field { grid, values: points.map(|c| Psi22(read_matrix(c))).collect() }),
            SnapshotKind::Curvature => Self::Curvature(Field {
                grid,
                values: points
                    .map(|c| {
                        let mut t = CurvTensor::zero();
                        for (i, m) in t.entries.iter_mut().flatten().enumerate() {
                            *m = read_matrix(&c[18 * i..18 * (i + 1)]);
                        }
                        t
                    })
                    .collect(),
            }),
        })
    }
}

fn push_matrix(m: &Matrix3<Complex64>, push: &mut dyn FnMut(f64)) {
    for r in 0..3 {
        for c in 0..3 {
            push(m[(r, c)].re);
            push(m[(r, c)].im);
        }
    }
}

fn read_matrix(data: &[f64]) -> Matrix3<Complex64> {
    Matrix3::from_fn(|r, c| {
        let i = 2 * (3 * r + c);
        Complex64::new(data[i], data[i + 1])
    })
}

pub fn write_snapshot(path: &Path, value: &SnapshotValue) -> Result<()> {
    fs::write(path, value.to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotValue> {
    SnapshotValue::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = PeriodicGrid::new(1, 8, 1.5).unwrap();
        let bytes = SnapshotValue::Real(Field::constant(g, 2.0)).to_bytes();
        assert_eq!(&bytes[..4], b"ANMF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 1.5);
        assert_eq!(bytes.len(), 28 + 8 * 64);
    }

    #[test]
    fn rejects_corruption() {
        let g = PeriodicGrid::new(1, 8, 1.0).unwrap();
        let mut bytes = SnapshotValue::Psi(Field::constant(g, Psi22::identity())).to_bytes();
        assert!(SnapshotValue::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(SnapshotValue::from_bytes(&bytes).is_err());
    }

    #[test]
    fn curvature_roundtrip() {
        let g = PeriodicGrid::new(2, 8, 1.0).unwrap();
        let mut t = CurvTensor::trace_model(0.7);
        t.entries[1][2][(0, 1)] = Complex64::new(-3.25, 1e-300);
        let v = SnapshotValue::Curvature(Field::constant(g, t));
        assert_eq!(SnapshotValue::from_bytes(&v.to_bytes()).unwrap(), v);
    }
}
