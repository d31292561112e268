use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{QhdError, Result};

/// Real scalar samples on a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Real vector samples; one value array per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

/// Complex samples on a grid; the wave function lives here.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if grid.len() == len {
        Ok(())
    } else {
        Err(QhdError::GridMismatch(format!(
            "{len} values for a grid of {} nodes",
            grid.len()
        )))
    }
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at node positions (radius in slot 0 for radial grids).
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                if grid.is_radial() {
                    f([grid.radius(i), 0.0, 0.0])
                } else {
                    f(grid.position(i))
                }
            })
            .collect();
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Quadrature of the field over the domain.
    pub fn integral(&self) -> f64 {
        if self.grid.is_radial() {
            self.values
                .iter()
                .enumerate()
                .map(|(j, v)| v * self.grid.radial_weight(j))
                .sum()
        } else {
            self.grid.cell_volume() * self.values.iter().sum::<f64>()
        }
    }

    /// Squared L2 norm with the grid's quadrature weights.
    pub fn norm_sq(&self) -> f64 {
        if self.grid.is_radial() {
            self.values
                .iter()
                .enumerate()
                .map(|(j, v)| v * v * self.grid.radial_weight(j))
                .sum()
        } else {
            self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Every `factor`-th node along each axis.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        let coarse = self.grid.coarsened(factor)?;
        let values = (0..coarse.len())
            .map(|i| {
                let m = coarse.unravel(i);
                self.values[self.grid.ravel([m[0] * factor, m[1] * factor, m[2] * factor])]
            })
            .collect();
        Ok(Self {
            grid: coarse,
            values,
        })
    }
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim {
            return Err(QhdError::GridMismatch(format!(
                "{} components for dim {}",
                components.len(),
                grid.dim
            )));
        }
        for c in &components {
            check_len(&grid, c.len())?;
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            components: vec![vec![0.0; grid.len()]; grid.dim],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut components = vec![vec![0.0; grid.len()]; grid.dim];
        for i in 0..grid.len() {
            let v = f(grid.position(i));
            for (a, c) in components.iter_mut().enumerate() {
                c[i] = v[a];
            }
        }
        Self { grid, components }
    }

    pub fn component(&self, axis: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.components[axis].clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Pointwise squared magnitude.
    pub fn magnitude_sq(&self) -> ScalarField {
        let mut out = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v * v;
            }
        }
        ScalarField {
            grid: self.grid,
            values: out,
        }
    }

    /// Pointwise product with a scalar field.
    pub fn scaled_by(&self, s: &ScalarField) -> Result<Self> {
        self.grid.check_same(&s.grid)?;
        Ok(Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().zip(&s.values).map(|(a, b)| a * b).collect())
                .collect(),
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.magnitude_sq().values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|v| v.is_finite())
    }

    pub fn subsample(&self, factor: usize) -> Result<Self> {
        let components = (0..self.dim())
            .map(|a| self.component(a).subsample(factor).map(|s| s.values))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: self.grid.coarsened(factor)?,
            components,
        })
    }
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                if grid.is_radial() {
                    f([grid.radius(i), 0.0, 0.0])
                } else {
                    f(grid.position(i))
                }
            })
            .collect();
        Self { grid, values }
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn density(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn real(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }

    pub fn imag(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.im).collect(),
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.values {
            *z *= c;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.density().integral()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// L2 distance to another field on the same grid.
    pub fn distance(&self, other: &ComplexField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let diff = ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        Ok(diff.norm())
    }

    pub fn subsample(&self, factor: usize) -> Result<Self> {
        let coarse = self.grid.coarsened(factor)?;
        let values = (0..coarse.len())
            .map(|i| {
                let m = coarse.unravel(i);
                self.values[self.grid.ravel([m[0] * factor, m[1] * factor, m[2] * factor])]
            })
            .collect();
        Ok(Self {
            grid: coarse,
            values,
        })
    }
}
