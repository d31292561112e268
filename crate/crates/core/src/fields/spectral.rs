//! Fourier-multiplier calculus on the periodic box.
//!
//! Transforms are unnormalized forward and `1/N` inverse. Plans are cached per
//! line length and shared read-only; every call allocates its own scratch.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::field::{ComplexField, ScalarField, VectorField};
use super::grid::Grid;
use crate::error::{QhdError, Result};

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, direction: FftDirection) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, direction == FftDirection::Forward);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

fn fft_rows(data: &mut [Complex64], fft: &Plan) {
    let n = fft.len();
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(n).for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, line| fft.process_with_scratch(line, scratch),
    );
}

/// In-place n-d transform over every axis of a row-major cube.
fn transform(data: &mut [Complex64], n: usize, dim: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    fft_rows(data, &fft);
    for axis in (0..dim.saturating_sub(1)).rev() {
        // Lines along `axis` have stride s inside contiguous blocks of n*s.
        let s = n.pow((dim - 1 - axis) as u32);
        let block = n * s;
        let mut scratch = vec![Complex64::new(0.0, 0.0); block];
        for chunk in data.chunks_mut(block) {
            scratch
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(j, line)| {
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = chunk[i * s + j];
                    }
                });
            fft_rows(&mut scratch, &fft);
            chunk.par_chunks_mut(s).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = scratch[j * n + i];
                }
            });
        }
    }
}

/// Spectral operators bound to one periodic grid.
#[derive(Clone, Debug)]
pub struct Spectral {
    grid: Grid,
    /// Angular wavenumbers of one axis in FFT order.
    k: Vec<f64>,
    /// Derivative wavenumbers: as `k` but zero at the Nyquist index.
    kd: Vec<f64>,
}

impl Spectral {
    pub fn new(grid: Grid) -> Result<Self> {
        grid.require_periodic()?;
        let n = grid.n;
        let dk = 2.0 * PI / grid.length;
        let k: Vec<f64> = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                dk * m
            })
            .collect();
        let mut kd = k.clone();
        kd[n / 2] = 0.0;
        Ok(Self { grid, k, kd })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut out = values.to_vec();
        transform(&mut out, self.grid.n, self.grid.dim, FftDirection::Forward);
        out
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        transform(&mut out, self.grid.n, self.grid.dim, FftDirection::Forward);
        out
    }

    pub fn inverse_in_place(&self, values: &mut [Complex64]) {
        transform(values, self.grid.n, self.grid.dim, FftDirection::Inverse);
        let scale = 1.0 / values.len() as f64;
        values.par_iter_mut().for_each(|v| *v *= scale);
    }

    pub fn inverse(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut out = values.to_vec();
        self.inverse_in_place(&mut out);
        out
    }

    /// Wave vector of a flat spectral index.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let m = self.grid.unravel(idx);
        let mut out = [0.0; 3];
        for a in 0..self.grid.dim {
            out[a] = self.k[m[a]];
        }
        out
    }

    fn derivative_vector(&self, idx: usize) -> [f64; 3] {
        let m = self.grid.unravel(idx);
        let mut out = [0.0; 3];
        for a in 0..self.grid.dim {
            out[a] = self.kd[m[a]];
        }
        out
    }

    /// `|k|^2` for every spectral index.
    pub fn k_squared(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.wavevector(i).iter().map(|k| k * k).sum())
            .collect()
    }

    fn multiply(&self, spec: &[Complex64], m: impl Fn(usize) -> Complex64 + Sync) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = spec
            .par_iter()
            .enumerate()
            .map(|(i, v)| v * m(i))
            .collect();
        self.inverse_in_place(&mut out);
        out
    }

    /// Applies two real-output multipliers with a single inverse transform.
    fn multiply_real_pair(
        &self,
        spec: &[Complex64],
        m1: impl Fn(usize) -> Complex64 + Sync,
        m2: impl Fn(usize) -> Complex64 + Sync,
    ) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut out: Vec<Complex64> = spec
            .par_iter()
            .enumerate()
            .map(|(idx, v)| v * m1(idx) + i * v * m2(idx))
            .collect();
        self.inverse_in_place(&mut out);
        (
            out.iter().map(|z| z.re).collect(),
            out.iter().map(|z| z.im).collect(),
        )
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        self.grid.check_same(grid)
    }

    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField> {
        self.check(&f.grid)?;
        let spec = self.forward_real(&f.values);
        let dim = self.grid.dim;
        let mut components = Vec::with_capacity(dim);
        let mut axis = 0;
        while axis < dim {
            let a = axis;
            let ik = |idx: usize, a: usize| Complex64::new(0.0, self.derivative_vector(idx)[a]);
            if a + 1 < dim {
                let (c1, c2) = self.multiply_real_pair(&spec, |i| ik(i, a), |i| ik(i, a + 1));
                components.push(c1);
                components.push(c2);
                axis += 2;
            } else {
                let c = self.multiply(&spec, |i| ik(i, a));
                components.push(c.iter().map(|z| z.re).collect());
                axis += 1;
            }
        }
        VectorField::new(self.grid, components)
    }

    /// Componentwise gradient of a complex field.
    pub fn gradient_complex(&self, psi: &ComplexField) -> Result<Vec<ComplexField>> {
        self.check(&psi.grid)?;
        let spec = self.forward(&psi.values);
        (0..self.grid.dim)
            .map(|a| {
                let values =
                    self.multiply(&spec, |i| Complex64::new(0.0, self.derivative_vector(i)[a]));
                ComplexField::new(self.grid, values)
            })
            .collect()
    }

    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(&f.grid)?;
        let spec = self.forward_real(&f.values);
        let k2 = self.k_squared();
        let out = self.multiply(&spec, |i| Complex64::new(-k2[i], 0.0));
        ScalarField::new(self.grid, out.iter().map(|z| z.re).collect())
    }

    pub fn laplacian_complex(&self, psi: &ComplexField) -> Result<ComplexField> {
        self.check(&psi.grid)?;
        let spec = self.forward(&psi.values);
        let k2 = self.k_squared();
        ComplexField::new(self.grid, self.multiply(&spec, |i| Complex64::new(-k2[i], 0.0)))
    }

    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        self.check(&v.grid)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (a, c) in v.components.iter().enumerate() {
            let spec = self.forward_real(c);
            acc.par_iter_mut().enumerate().for_each(|(i, s)| {
                *s += spec[i] * Complex64::new(0.0, self.derivative_vector(i)[a]);
            });
        }
        self.inverse_in_place(&mut acc);
        ScalarField::new(self.grid, acc.iter().map(|z| z.re).collect())
    }

    fn partial(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let spec = self.forward_real(values);
        self.multiply(&spec, |i| Complex64::new(0.0, self.derivative_vector(i)[axis]))
            .iter()
            .map(|z| z.re)
            .collect()
    }

    /// `d1 F2 - d2 F1` on a two-dimensional grid.
    pub fn curl2d(&self, v: &VectorField) -> Result<ScalarField> {
        self.check(&v.grid)?;
        self.grid.require_dim(2)?;
        let a = self.partial(&v.components[1], 0);
        let b = self.partial(&v.components[0], 1);
        ScalarField::new(self.grid, a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }

    pub fn curl3d(&self, v: &VectorField) -> Result<VectorField> {
        self.check(&v.grid)?;
        self.grid.require_dim(3)?;
        let d = |c: usize, a: usize| self.partial(&v.components[c], a);
        let sub = |x: Vec<f64>, y: Vec<f64>| x.iter().zip(&y).map(|(p, q)| p - q).collect();
        VectorField::new(
            self.grid,
            vec![
                sub(d(2, 1), d(1, 2)),
                sub(d(0, 2), d(2, 0)),
                sub(d(1, 0), d(0, 1)),
            ],
        )
    }

    /// Fourier multiplier `|k|^s`, with the mean mode sent to zero.
    pub fn fractional_deriv(&self, f: &ScalarField, s: f64) -> Result<ScalarField> {
        self.check(&f.grid)?;
        if !(s.abs() <= 2.0) {
            return Err(QhdError::Range {
                what: "fractional order",
                detail: format!("{s} not in [-2, 2]"),
            });
        }
        let spec = self.forward_real(&f.values);
        let k2 = self.k_squared();
        let out = self.multiply(&spec, |i| {
            if k2[i] == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(k2[i].powf(0.5 * s), 0.0)
            }
        });
        ScalarField::new(self.grid, out.iter().map(|z| z.re).collect())
    }

    /// Mean-zero potential `S` minimizing `||grad S - v||`, i.e. `lap S = div v`.
    pub fn gradient_potential(&self, v: &VectorField) -> Result<ScalarField> {
        self.check(&v.grid)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (a, c) in v.components.iter().enumerate() {
            let spec = self.forward_real(c);
            acc.par_iter_mut().enumerate().for_each(|(i, s)| {
                let kd = self.derivative_vector(i);
                let kk: f64 = kd.iter().map(|k| k * k).sum();
                if kk > 0.0 {
                    *s += spec[i] * Complex64::new(0.0, -kd[a] / kk);
                }
            });
        }
        self.inverse_in_place(&mut acc);
        ScalarField::new(self.grid, acc.iter().map(|z| z.re).collect())
    }

    /// Squared L2 norm evaluated in Fourier space (Parseval).
    pub fn spectral_norm_sq(&self, f: &ScalarField) -> Result<f64> {
        self.check(&f.grid)?;
        let spec = self.forward_real(&f.values);
        let n = spec.len() as f64;
        Ok(self.grid.cell_volume() * spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / n)
    }
}

pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    Spectral::new(f.grid)?.gradient(f)
}

pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    Spectral::new(f.grid)?.laplacian(f)
}

pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    Spectral::new(v.grid)?.divergence(v)
}

pub fn curl2d(v: &VectorField) -> Result<ScalarField> {
    Spectral::new(v.grid)?.curl2d(v)
}

pub fn fractional_deriv(f: &ScalarField, s: f64) -> Result<ScalarField> {
    Spectral::new(f.grid)?.fractional_deriv(f, s)
}
