use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::field::ScalarField;
use super::grid::Grid;
use crate::error::Result;

/// Conservative finite-difference form of `d_r^2 + (d-1)/r d_r` on the
/// cell-centred radial grid.
///
/// Row `j` reads `(a_{j+1/2}(f_{j+1}-f_j) - a_{j-1/2}(f_j-f_{j-1})) / (r_j^{d-1} h^2)`
/// with face weights chosen so the operator is symmetric in the
/// `r^{d-1}` inner product and exact on `r^2`. The inner face weight vanishes
/// (even symmetry at the origin); the ghost value beyond `r_max` is zero.
#[derive(Clone, Debug)]
pub struct RadialOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RadialOperator {
    pub fn new(grid: &Grid) -> Result<Self> {
        grid.require_radial()?;
        let n = grid.n;
        let h = grid.spacing();
        let d = grid.dim;
        let face = |j: usize| -> f64 {
            // Weight on the face between nodes j and j+1.
            match d {
                2 => (j as f64 + 1.0) * h,
                _ => grid.radius(j) * grid.radius(j + 1),
            }
        };
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let w = grid.radius(j).powi(d as i32 - 1) * h * h;
            let right = face(j);
            let left = if j == 0 { 0.0 } else { face(j - 1) };
            diag[j] = -(left + right) / w;
            if j > 0 {
                lower[j] = left / w;
            }
            if j + 1 < n {
                upper[j] = right / w;
            }
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut acc = f[j] * self.diag[j];
                if j > 0 {
                    acc = acc + f[j - 1] * self.lower[j];
                }
                if j + 1 < n {
                    acc = acc + f[j + 1] * self.upper[j];
                }
                acc
            })
            .collect()
    }
}

/// Radial Laplacian of a field on a radial grid.
pub fn radial_laplacian(f: &ScalarField) -> Result<ScalarField> {
    let op = RadialOperator::new(&f.grid)?;
    ScalarField::new(f.grid, op.apply(&f.values))
}

/// Centred first derivative with an even reflection at the origin and a zero
/// ghost value beyond `r_max`.
pub fn radial_derivative<T>(grid: &Grid, f: &[T]) -> Vec<T>
where
    T: Copy + Sub<Output = T> + Mul<f64, Output = T> + Default,
{
    let n = f.len();
    let inv = 0.5 / grid.spacing();
    (0..n)
        .map(|j| {
            let left = if j == 0 { f[0] } else { f[j - 1] };
            let right = if j + 1 < n { f[j + 1] } else { T::default() };
            (right - left) * inv
        })
        .collect()
}

/// Solves a complex tridiagonal system with the Thomas algorithm.
///
/// `a` is the sub-diagonal (a[0] unused), `b` the diagonal, `c` the
/// super-diagonal (c[n-1] unused).
pub fn solve_tridiagonal(
    a: &[Complex64],
    b: &[Complex64],
    c: &[Complex64],
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let n = b.len();
    let mut cp = vec![Complex64::new(0.0, 0.0); n];
    let mut dp = vec![Complex64::new(0.0, 0.0); n];
    cp[0] = c[0] / b[0];
    dp[0] = rhs[0] / b[0];
    for j in 1..n {
        let m = b[j] - a[j] * cp[j - 1];
        if j + 1 < n {
            cp[j] = c[j] / m;
        }
        dp[j] = (rhs[j] - a[j] * dp[j - 1]) / m;
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    x[n - 1] = dp[n - 1];
    for j in (0..n - 1).rev() {
        x[j] = dp[j] - cp[j] * x[j + 1];
    }
    x
}
