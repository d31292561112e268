use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    CartesianPeriodic,
    Radial,
}

/// A uniform grid.
///
/// For the periodic kind, `dim` axes of `n` points span the box
/// `[-L/2, L/2)^dim`, so the origin sits on a node. For the radial kind,
/// `dim` is the ambient dimension `d`, `n` is the number of radial cells and
/// `length` is `r_max`; nodes are cell centered at `r_j = (j + 1/2) h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub kind: GridKind,
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl Grid {
    pub fn periodic(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(QhdError::Range {
                what: "dimension",
                detail: format!("{dim} not in 1..=3"),
            });
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(QhdError::Range {
                what: "points per axis",
                detail: format!("{n} is not a power of two >= 4"),
            });
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(QhdError::Range {
                what: "box length",
                detail: format!("{length}"),
            });
        }
        Ok(Self {
            kind: GridKind::CartesianPeriodic,
            dim,
            n,
            length,
        })
    }

    pub fn radial(d: usize, n_r: usize, r_max: f64) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(QhdError::Range {
                what: "radial ambient dimension",
                detail: format!("{d} not in {{2, 3}}"),
            });
        }
        if n_r < 3 {
            return Err(QhdError::Range {
                what: "radial points",
                detail: format!("{n_r} < 3"),
            });
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(QhdError::Range {
                what: "r_max",
                detail: format!("{r_max}"),
            });
        }
        Ok(Self {
            kind: GridKind::Radial,
            dim: d,
            n: n_r,
            length: r_max,
        })
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == GridKind::CartesianPeriodic
    }

    pub fn is_radial(&self) -> bool {
        self.kind == GridKind::Radial
    }

    pub fn require_periodic(&self) -> Result<()> {
        if self.is_periodic() {
            Ok(())
        } else {
            Err(QhdError::UnsupportedGrid(
                "operation needs a Cartesian periodic grid".into(),
            ))
        }
    }

    pub fn require_radial(&self) -> Result<()> {
        if self.is_radial() {
            Ok(())
        } else {
            Err(QhdError::UnsupportedGrid(
                "operation needs a radial grid".into(),
            ))
        }
    }

    pub fn require_dim(&self, dim: usize) -> Result<()> {
        self.require_periodic()?;
        if self.dim == dim {
            Ok(())
        } else {
            Err(QhdError::UnsupportedGrid(format!(
                "operation needs dim = {dim}, grid has dim = {}",
                self.dim
            )))
        }
    }

    /// Grid spacing `h = L/n` (or `h_r = r_max/n_r`).
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Number of stored values.
    pub fn len(&self) -> usize {
        match self.kind {
            GridKind::CartesianPeriodic => self.n.pow(self.dim as u32),
            GridKind::Radial => self.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one periodic node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        match self.kind {
            GridKind::CartesianPeriodic => self.spacing().powi(self.dim as i32),
            GridKind::Radial => self.spacing(),
        }
    }

    /// Box volume `L^dim` of a periodic grid.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Coordinate of index `i` along any periodic axis.
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    /// Radius of radial node `j`.
    pub fn radius(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.spacing()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.radius(j)).collect()
    }

    /// Area of the unit sphere in the ambient dimension (2 pi or 4 pi).
    pub fn sphere_area(&self) -> f64 {
        match self.dim {
            2 => 2.0 * PI,
            3 => 4.0 * PI,
            1 => 2.0,
            _ => unreachable!("dimension validated at construction"),
        }
    }

    /// Radial quadrature weight `C(d) h r_j^{d-1}` of node `j`.
    pub fn radial_weight(&self, j: usize) -> f64 {
        self.sphere_area() * self.spacing() * self.radius(j).powi(self.dim as i32 - 1)
    }

    /// Multi-index of a flat (row-major) index; unused axes are zero.
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn ravel(&self, index: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, axis| acc * self.n + index[axis] % self.n)
    }

    /// Physical position of a flat index; unused axes are zero.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let m = self.unravel(idx);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coord(m[axis]);
        }
        x
    }

    /// Flat index of the neighbour one step along `axis` (periodic wrap).
    pub fn shift(&self, idx: usize, axis: usize, step: isize) -> usize {
        let mut m = self.unravel(idx);
        let n = self.n as isize;
        m[axis] = ((m[axis] as isize + step).rem_euclid(n)) as usize;
        self.ravel(m)
    }

    /// Same geometry with `n / factor` points per axis.
    pub fn coarsened(&self, factor: usize) -> Result<Grid> {
        self.require_periodic()?;
        if factor == 0 || self.n % factor != 0 {
            return Err(QhdError::Range {
                what: "subsample factor",
                detail: format!("{factor} does not divide n = {}", self.n),
            });
        }
        let n = self.n / factor;
        if n < 4 {
            return Err(QhdError::Range {
                what: "subsample factor",
                detail: format!("coarse grid would have only {n} points per axis"),
            });
        }
        Ok(Grid { n, ..*self })
    }

    /// Minimum-image displacement `a - b` along one periodic axis.
    pub fn wrap_delta(&self, delta: f64) -> f64 {
        let l = self.length;
        delta - l * (delta / l).round()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(QhdError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::periodic(2, 100, 1.0).is_err());
        assert!(Grid::periodic(4, 64, 1.0).is_err());
        assert!(Grid::periodic(2, 64, 0.0).is_err());
        assert!(Grid::radial(4, 64, 1.0).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::periodic(3, 8, 2.0).unwrap();
        for idx in [0, 1, 7, 8, 63, 64, 511] {
            assert_eq!(g.ravel(g.unravel(idx)), idx);
        }
        assert_eq!(g.position(0), [-1.0, -1.0, -1.0]);
        let centre = g.ravel([4, 4, 4]);
        assert_eq!(g.position(centre), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn radial_nodes_are_cell_centred() {
        let g = Grid::radial(3, 10, 1.0).unwrap();
        assert!((g.radius(0) - 0.05).abs() < 1e-15);
        assert!((g.radius(9) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn shift_wraps() {
        let g = Grid::periodic(2, 4, 1.0).unwrap();
        let idx = g.ravel([0, 3, 0]);
        assert_eq!(g.unravel(g.shift(idx, 1, 1)), [0, 0, 0]);
        assert_eq!(g.unravel(g.shift(idx, 0, -1)), [3, 3, 0]);
    }
}
