//! Binary field snapshots.
//!
//! Layout, all little-endian: magic `QHDF`, version `u32`, dim `u32`,
//! points per axis (or radial points) `u32`, box length (or `r_max`) `f64`,
//! kind `u32`, component count `u32`, then `f64` values in row-major order
//! with components interleaved per node. Kind 0 is periodic, 1 radial; the
//! bit `0x100` marks complex values stored as `(re, im)` pairs. Radial files
//! store the ambient dimension in the dim slot.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::field::{ComplexField, ScalarField, VectorField};
use super::grid::{Grid, GridKind};
use crate::error::{QhdError, Result};

pub const MAGIC: &[u8; 4] = b"QHDF";
pub const VERSION: u32 = 1;
const COMPLEX_FLAG: u32 = 0x100;

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Scalar(ScalarField),
    Vector(VectorField),
    Complex(ComplexField),
    /// Several real components that do not form a vector field, such as
    /// hydrodynamic data `(sqrt_rho, Lambda_1, .., Lambda_d)`.
    Stack { grid: Grid, components: Vec<Vec<f64>> },
}

impl Snapshot {
    pub fn grid(&self) -> &Grid {
        match self {
            Snapshot::Scalar(f) => &f.grid,
            Snapshot::Vector(f) => &f.grid,
            Snapshot::Complex(f) => &f.grid,
            Snapshot::Stack { grid, .. } => grid,
        }
    }

    pub fn into_complex(self) -> Result<ComplexField> {
        match self {
            Snapshot::Complex(f) => Ok(f),
            Snapshot::Scalar(f) => Ok(ComplexField {
                grid: f.grid,
                values: f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            }),
            _ => Err(QhdError::Format(
                "expected a complex or scalar snapshot".into(),
            )),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            Snapshot::Scalar(f) => Ok(f),
            _ => Err(QhdError::Format("expected a scalar snapshot".into())),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            Snapshot::Vector(f) => Ok(f),
            _ => Err(QhdError::Format("expected a vector snapshot".into())),
        }
    }
}

fn header(grid: &Grid, complex: bool, components: usize) -> Vec<u8> {
    let mut h = Vec::with_capacity(32);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&VERSION.to_le_bytes());
    h.extend_from_slice(&(grid.dim as u32).to_le_bytes());
    h.extend_from_slice(&(grid.n as u32).to_le_bytes());
    h.extend_from_slice(&grid.length.to_le_bytes());
    let mut kind = match grid.kind {
        GridKind::CartesianPeriodic => 0u32,
        GridKind::Radial => 1,
    };
    if complex {
        kind |= COMPLEX_FLAG;
    }
    h.extend_from_slice(&kind.to_le_bytes());
    h.extend_from_slice(&(components as u32).to_le_bytes());
    h
}

pub fn write_snapshot(path: impl AsRef<Path>, snap: &Snapshot) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let put = |w: &mut BufWriter<File>, v: f64| w.write_all(&v.to_le_bytes());
    match snap {
        Snapshot::Scalar(f) => {
            w.write_all(&header(&f.grid, false, 1))?;
            for &v in &f.values {
                put(&mut w, v)?;
            }
        }
        Snapshot::Vector(f) => {
            w.write_all(&header(&f.grid, false, f.dim()))?;
            for i in 0..f.grid.len() {
                for c in &f.components {
                    put(&mut w, c[i])?;
                }
            }
        }
        Snapshot::Stack { grid, components } => {
            if components.is_empty() || components.iter().any(|c| c.len() != grid.len()) {
                return Err(QhdError::GridMismatch("stack components must match the grid".into()));
            }
            w.write_all(&header(grid, false, components.len()))?;
            for i in 0..grid.len() {
                for c in components {
                    put(&mut w, c[i])?;
                }
            }
        }
        Snapshot::Complex(f) => {
            w.write_all(&header(&f.grid, true, 1))?;
            for z in &f.values {
                put(&mut w, z.re)?;
                put(&mut w, z.im)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_complex(path: impl AsRef<Path>, psi: &ComplexField) -> Result<()> {
    write_snapshot(path, &Snapshot::Complex(psi.clone()))
}

fn u32_at(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().expect("slice of four bytes"))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    if buf.len() < 32 || &buf[..4] != MAGIC {
        return Err(QhdError::Format("missing QHDF header".into()));
    }
    let version = u32_at(&buf, 4);
    if version != VERSION {
        return Err(QhdError::Format(format!("unsupported version {version}")));
    }
    let dim = u32_at(&buf, 8) as usize;
    let n = u32_at(&buf, 12) as usize;
    let length = f64::from_le_bytes(buf[16..24].try_into().expect("eight bytes"));
    let kind = u32_at(&buf, 24);
    let components = u32_at(&buf, 28) as usize;
    let complex = kind & COMPLEX_FLAG != 0;
    let grid = match kind & !COMPLEX_FLAG {
        0 => Grid::periodic(dim, n, length),
        1 => Grid::radial(dim, n, length),
        other => return Err(QhdError::Format(format!("unknown grid kind {other}"))),
    }
    .map_err(|e| QhdError::Format(format!("bad grid in header: {e}")))?;

    let per_node = components * if complex { 2 } else { 1 };
    let expected = grid.len() * per_node;
    let body = &buf[32..];
    if body.len() != expected * 8 {
        return Err(QhdError::Format(format!(
            "body holds {} bytes, header implies {}",
            body.len(),
            expected * 8
        )));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(QhdError::Format("snapshot contains non-finite values".into()));
    }
    match (complex, components) {
        (true, 1) => Ok(Snapshot::Complex(ComplexField::new(
            grid,
            vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
        )?)),
        (false, 1) => Ok(Snapshot::Scalar(ScalarField::new(grid, vals)?)),
        (false, c) if c == grid.dim && grid.is_periodic() => {
            let components = (0..c)
                .map(|a| vals.iter().skip(a).step_by(c).copied().collect())
                .collect();
            Ok(Snapshot::Vector(VectorField::new(grid, components)?))
        }
        (false, c) => Ok(Snapshot::Stack {
            grid,
            components: (0..c)
                .map(|a| vals.iter().skip(a).step_by(c).copied().collect())
                .collect(),
        }),
        _ => Err(QhdError::Format(format!(
            "unsupported component layout: {components} components, complex = {complex}"
        ))),
    }
}

pub fn read_complex(path: impl AsRef<Path>) -> Result<ComplexField> {
    read_snapshot(path)?.into_complex()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_every_layout() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::periodic(2, 8, 3.0).unwrap();
        let scalar = ScalarField::from_fn(grid, |x| x[0] - 2.0 * x[1]);
        let vector = VectorField::from_fn(grid, |x| [x[1], -x[0], 0.0]);
        let psi = ComplexField::from_fn(grid, |x| Complex64::new(x[0], x[1] * x[1]));
        let radial = ScalarField::from_fn(Grid::radial(3, 10, 2.0).unwrap(), |r| r[0]);
        for snap in [
            Snapshot::Scalar(scalar),
            Snapshot::Vector(vector),
            Snapshot::Complex(psi),
            Snapshot::Scalar(radial),
            Snapshot::Stack {
                grid,
                components: vec![vec![1.0; 64], vec![2.0; 64], vec![-0.5; 64]],
            },
        ] {
            let path = dir.path().join("f.qhdf");
            write_snapshot(&path, &snap).unwrap();
            assert_eq!(read_snapshot(&path).unwrap(), snap);
        }
    }

    #[test]
    fn header_is_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.qhdf");
        let grid = Grid::periodic(1, 4, 2.0).unwrap();
        write_complex(&path, &ComplexField::zeros(grid)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"QHDF");
        assert_eq!(bytes[4..8], [1, 0, 0, 0]);
        assert_eq!(bytes[8..12], [1, 0, 0, 0]);
        assert_eq!(bytes[12..16], [4, 0, 0, 0]);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2.0);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 0x100);
        assert_eq!(bytes.len(), 32 + 4 * 16);
    }

    #[test]
    fn rejects_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.qhdf");
        let grid = Grid::periodic(1, 4, 2.0).unwrap();
        write_snapshot(&path, &Snapshot::Scalar(ScalarField::zeros(grid))).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_snapshot(&path), Err(QhdError::Format(_))));
        std::fs::write(&path, b"nope").unwrap();
        assert!(read_snapshot(&path).is_err());
    }
}
