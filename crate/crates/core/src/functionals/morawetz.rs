use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{QhdError, Result};
use crate::evolve::KappaMode;
use crate::fields::{Grid, Spectral};
use crate::polar::HydroFields;

use super::{MorawetzNorms, PowerLaw};

/// Largest node count accepted by the direct pairwise sum.
pub const MORAWETZ_NODE_LIMIT: usize = 64 * 64;

/// `sum_x sum_y rho(y) (x - y)/|x - y| . J(x) dv^2`, with the diagonal
/// dropped. Rows are summed in parallel and reduced in index order so the
/// result does not depend on scheduling.
fn interaction(dim: usize, points: &[[f64; 3]], rho: &[f64], current: &[Vec<f64>], dv: f64) -> f64 {
    let rows: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let x = points[i];
            let mut acc = 0.0;
            for (j, y) in points.iter().enumerate() {
                if i == j || rho[j] == 0.0 {
                    continue;
                }
                let mut dist = 0.0;
                let mut dot = 0.0;
                for a in 0..dim {
                    let d = x[a] - y[a];
                    dist += d * d;
                    dot += d * current[a][i];
                }
                acc += rho[j] * dot / dist.sqrt();
            }
            acc
        })
        .collect();
    rows.iter().sum::<f64>() * dv * dv
}

/// Interaction Morawetz functional on the grid itself. Positions are taken
/// in the fundamental domain, without periodizing the kernel.
pub fn morawetz_h(h: &HydroFields) -> Result<f64> {
    let grid = *h.grid();
    grid.require_periodic()?;
    if grid.len() > MORAWETZ_NODE_LIMIT {
        return Err(QhdError::SizeLimit {
            nodes: grid.len(),
            limit: MORAWETZ_NODE_LIMIT,
        });
    }
    let points: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.position(i)).collect();
    let rho = h.rho().values;
    let current = h.current().components;
    Ok(interaction(grid.dim, &points, &rho, &current, grid.cell_volume()))
}

/// Matrix sampling the trigonometric interpolant of `n` periodic samples at
/// `m` equispaced points of the same box.
fn resample_matrix(n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let theta = 2.0 * PI * (i as f64 / m as f64 - j as f64 / n as f64);
            let mut s = 1.0 + (0.5 * n as f64 * theta).cos();
            for k in 1..n / 2 {
                s += 2.0 * (k as f64 * theta).cos();
            }
            out[i * n + j] = s / n as f64;
        }
    }
    out
}

fn resample(values: &[f64], dim: usize, n: usize, m: usize, mat: &[f64]) -> Vec<f64> {
    let mut shape = vec![n; dim];
    let mut data = values.to_vec();
    for axis in 0..dim {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut next = vec![0.0; outer * m * inner];
        for o in 0..outer {
            for i in 0..m {
                let row = &mat[i * n..(i + 1) * n];
                for c in 0..inner {
                    let mut acc = 0.0;
                    for (j, w) in row.iter().enumerate() {
                        acc += w * data[(o * n + j) * inner + c];
                    }
                    next[(o * m + i) * inner + c] = acc;
                }
            }
        }
        shape[axis] = m;
        data = next;
    }
    data
}

/// Interaction functional evaluated on `m^d` equispaced points, the density
/// and current being sampled from their trigonometric interpolants.
pub fn morawetz_h_resampled(h: &HydroFields, m: usize) -> Result<f64> {
    let grid = *h.grid();
    grid.require_periodic()?;
    let nodes = m.pow(grid.dim as u32);
    if m < 4 || nodes > MORAWETZ_NODE_LIMIT {
        return Err(QhdError::SizeLimit {
            nodes,
            limit: MORAWETZ_NODE_LIMIT,
        });
    }
    let mat = resample_matrix(grid.n, m);
    let rho = resample(&h.rho().values, grid.dim, grid.n, m, &mat);
    let current: Vec<Vec<f64>> = h
        .current()
        .components
        .iter()
        .map(|c| resample(c, grid.dim, grid.n, m, &mat))
        .collect();
    let coarse = Grid { n: m, ..grid };
    let points: Vec<[f64; 3]> = (0..nodes).map(|i| coarse.position(i)).collect();
    let dv = (grid.length / m as f64).powi(grid.dim as i32);
    Ok(interaction(grid.dim, &points, &rho, &current, dv))
}

/// `|| |grad|^s f ||_2^2` in Fourier space; the mean mode is dropped for
/// `s != 0`.
fn fractional_norm_sq(sp: &Spectral, values: &[f64], s: f64) -> f64 {
    let grid = sp.grid();
    if s == 0.0 {
        return values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume();
    }
    let spec = sp.forward_real(values);
    let k2 = sp.k_squared();
    let acc: f64 = spec
        .iter()
        .zip(&k2)
        .filter(|(_, k)| **k > 0.0)
        .map(|(z, k)| k.powf(s) * z.norm_sqr())
        .sum();
    acc * grid.cell_volume() / spec.len() as f64
}

/// Squared norms `|| |grad|^{(1-d)/2} sqrt(rho p) ||^2` and
/// `|| |grad|^{(3-d)/2} sqrt(rho K) ||^2` with `K(rho) = int_0^rho s kappa(s) ds`.
pub fn morawetz_rhs_norms(
    h: &HydroFields,
    law: impl Into<PowerLaw>,
    kappa: KappaMode,
) -> Result<MorawetzNorms> {
    let law = law.into();
    let grid = *h.grid();
    let sp = Spectral::new(grid)?;
    let d = grid.dim as f64;
    let rho: Vec<f64> = h.sqrt_rho.values.iter().map(|a| a * a).collect();
    let pressure: Vec<f64> = rho.iter().map(|&r| (r * law.p(r)).max(0.0).sqrt()).collect();
    let capillary: Vec<f64> = match kappa {
        KappaMode::Qhd => rho.iter().map(|r| 0.5 * r).collect(),
        KappaMode::Constant(c) => rho.iter().map(|r| (0.5 * c).sqrt() * r.powf(1.5)).collect(),
    };
    Ok(MorawetzNorms {
        pressure_norm: fractional_norm_sq(&sp, &pressure, 1.0 - d),
        capillary_norm: fractional_norm_sq(&sp, &capillary, 3.0 - d),
    })
}
