//! Initial data for each scenario recipe.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Recipe, Scenario};
use crate::error::{QhdError, Result};
use crate::fields::{read_snapshot, ComplexField, Grid, ScalarField, Snapshot, VectorField};
use crate::lifting::{
    lift_planar_product, lift_positive, lift_radial, lift_vortices, vortex_amplitude, vortex_phase,
    LiftOptions, Vortex, VortexSet,
};
use crate::polar::{read_hydro, HydroData, HydroFields, RadialHydro};

/// Lifted initial state plus what the diagnostics need to know about it.
#[derive(Clone, Debug)]
pub struct Initial {
    pub psi: ComplexField,
    /// Hydrodynamic data the state was lifted from, when there was any.
    pub hydro: Option<HydroData>,
    pub vortices: Vec<Vortex>,
    /// Suggested loop radius for circulation checks.
    pub loop_radius: f64,
}

/// Hydrodynamic data of the gaussian recipe on a periodic grid.
pub fn gaussian_hydro(
    grid: &Grid,
    amplitude: f64,
    width: f64,
    center: [f64; 3],
    background: f64,
    chirp: f64,
    kick: [i64; 3],
) -> Result<HydroFields> {
    grid.require_periodic()?;
    let dim = grid.dim;
    let offset = |x: [f64; 3]| {
        let mut d = [0.0; 3];
        for a in 0..dim {
            d[a] = grid.wrap_delta(x[a] - center[a]);
        }
        d
    };
    let bump = |d: [f64; 3]| (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * width * width)).exp();
    let sqrt_rho = ScalarField::from_fn(*grid, |x| background + amplitude * bump(offset(x)));
    let lattice = 2.0 * PI / grid.length;
    let lambda = VectorField::from_fn(*grid, |x| {
        let d = offset(x);
        let g = bump(d);
        let a = background + amplitude * g;
        let mut out = [0.0; 3];
        for ax in 0..dim {
            out[ax] = a * (-chirp * g * d[ax] / (width * width) + lattice * kick[ax] as f64);
        }
        out
    });
    HydroFields::new(sqrt_rho, lambda)
}

fn gaussian_psi(grid: &Grid, recipe: &Recipe) -> ComplexField {
    let Recipe::Gaussian { amplitude, width, center, background, chirp, kick } = *recipe else {
        unreachable!()
    };
    let lattice = 2.0 * PI / grid.length;
    ComplexField::from_fn(*grid, |x| {
        let mut r2 = 0.0;
        let mut wave = 0.0;
        for a in 0..grid.dim {
            let d = grid.wrap_delta(x[a] - center[a]);
            r2 += d * d;
            wave += lattice * kick[a] as f64 * x[a];
        }
        let g = (-r2 / (2.0 * width * width)).exp();
        Complex64::from_polar(background + amplitude * g, chirp * g + wave)
    })
}

fn pair(separation: f64) -> Vec<Vortex> {
    vec![
        Vortex { x: [-0.5 * separation, 0.0], k: 1 },
        Vortex { x: [0.5 * separation, 0.0], k: -1 },
    ]
}

/// Amplitude `A prod tanh(d_j / core)` with the matching vortex phase.
pub fn vortex_hydro(grid: &Grid, vs: &VortexSet, amplitude: f64, core: f64) -> Result<HydroFields> {
    let a = vortex_amplitude(grid, vs, core)?.map(|v| amplitude * v);
    let (_, grad) = vortex_phase(grid, vs)?;
    let lambda = grad.scaled_by(&a)?;
    HydroFields::new(a, lambda)
}

/// Checkerboard of alternating windings at cell centres, each moved by a
/// uniform offset of at most `jitter` cell sizes drawn from `seed`.
pub fn lattice_vortices(grid: &Grid, rows: usize, cols: usize, jitter: f64, seed: u64) -> Vec<Vortex> {
    let l = grid.length;
    let (dx, dy) = (l / cols as f64, l / rows as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let (mut x, mut y) = (-0.5 * l + (j as f64 + 0.5) * dx, -0.5 * l + (i as f64 + 0.5) * dy);
            if jitter > 0.0 {
                x += jitter * dx * rng.random_range(-1.0..1.0);
                y += jitter * dy * rng.random_range(-1.0..1.0);
            }
            let k = if (i + j) % 2 == 0 { 1 } else { -1 };
            out.push(Vortex { x: [x, y], k });
        }
    }
    out
}

/// Lifts stored hydrodynamic data: radial data with regularization `n_reg`,
/// positive periodic data directly, anything else through the vortex route.
pub fn lift_data(data: &HydroData, vortices: &[Vortex], n_reg: u32) -> Result<ComplexField> {
    match data {
        HydroData::Radial(h) => lift_radial(h, n_reg),
        HydroData::Periodic(h) => {
            let opts = LiftOptions::default();
            if vortices.is_empty() && h.sqrt_rho.min() > 0.0 {
                return lift_positive(h, 0.0, &opts);
            }
            let vs = if vortices.is_empty() {
                VortexSet::empty()
            } else {
                periodic_set(h.grid(), vortices.to_vec())?
            };
            lift_vortices(h, &vs, &opts)
        }
    }
}

/// Vortex set whose separation parameter is the smallest minimum-image distance.
pub fn periodic_set(grid: &Grid, vortices: Vec<Vortex>) -> Result<VortexSet> {
    let mut alpha = f64::INFINITY;
    for (i, a) in vortices.iter().enumerate() {
        for b in &vortices[i + 1..] {
            alpha = alpha.min(grid.wrap_delta(a.x[0] - b.x[0]).hypot(grid.wrap_delta(a.x[1] - b.x[1])));
        }
    }
    VortexSet::new(vortices, if alpha.is_finite() { alpha } else { 0.5 * grid.length })
}

/// Builds the initial state of a scenario.
pub fn initial_state(s: &Scenario) -> Result<Initial> {
    let plain = |psi: ComplexField, hydro: Option<HydroData>| Initial {
        loop_radius: 0.25 * psi.grid.length,
        psi,
        hydro,
        vortices: Vec::new(),
    };
    let grid = s.grid;
    match &s.recipe {
        r @ Recipe::Gaussian { amplitude, width, center, background, chirp, kick } => {
            let g = grid.expect("gaussian recipe has a grid");
            let h = gaussian_hydro(&g, *amplitude, *width, *center, *background, *chirp, *kick)?;
            Ok(plain(gaussian_psi(&g, r), Some(HydroData::Periodic(h))))
        }
        Recipe::PlaneWave { amplitude, modes } => {
            let g = grid.expect("plane-wave recipe has a grid");
            let q = 2.0 * PI / g.length;
            let psi = ComplexField::from_fn(g, |x| {
                let phase: f64 = (0..g.dim).map(|a| q * modes[a] as f64 * x[a]).sum();
                Complex64::from_polar(*amplitude, phase)
            });
            Ok(plain(psi, None))
        }
        Recipe::VortexPair { amplitude, separation, core } => {
            let g = grid.expect("vortex recipes have a grid");
            vortex_initial(&g, pair(*separation), *amplitude, *core)
        }
        Recipe::VortexLattice { amplitude, rows, cols, core, jitter } => {
            let g = grid.expect("vortex recipes have a grid");
            vortex_initial(&g, lattice_vortices(&g, *rows, *cols, *jitter, s.seed), *amplitude, *core)
        }
        Recipe::RadialProfile { amplitude, width, chirp, n_reg } => {
            let g = grid.expect("radial recipe has a grid");
            let a = ScalarField::from_fn(g, |x| amplitude * (-x[0] * x[0] / (2.0 * width * width)).exp());
            let lambda = g.radii().iter().zip(&a.values).map(|(r, v)| chirp * r * v).collect();
            let h = RadialHydro::new(a, lambda)?;
            let psi = lift_radial(&h, *n_reg)?;
            Ok(plain(psi, Some(HydroData::Radial(h))))
        }
        Recipe::PlanarProduct { amplitude, separation, core, width_z } => {
            let g = grid.expect("planar recipe has a grid");
            let plane = Grid::periodic(2, g.n, g.length)?;
            let vs = periodic_set(&plane, pair(*separation))?;
            let h = vortex_hydro(&plane, &vs, *amplitude, *core)?;
            let psi1 = lift_vortices(&h, &vs, &LiftOptions::default())?;
            let line = Grid::periodic(1, g.n, g.length)?;
            let profile = ScalarField::from_fn(line, |x| (-x[0] * x[0] / (2.0 * width_z * width_z)).exp());
            Ok(plain(lift_planar_product(&psi1, &profile)?, None))
        }
        Recipe::FromFile { path } => match read_snapshot(path)? {
            snap @ (Snapshot::Complex(_) | Snapshot::Scalar(_)) => Ok(plain(snap.into_complex()?, None)),
            Snapshot::Stack { .. } => {
                let data = read_hydro(path)?;
                Ok(plain(lift_data(&data, &[], 10_000)?, Some(data)))
            }
            Snapshot::Vector(_) => Err(QhdError::Format(format!(
                "{} holds a vector field; expected a wave function or hydrodynamic data",
                path.display()
            ))),
        },
    }
}

fn vortex_initial(grid: &Grid, vortices: Vec<Vortex>, amplitude: f64, core: f64) -> Result<Initial> {
    let vs = periodic_set(grid, vortices)?;
    let h = vortex_hydro(grid, &vs, amplitude, core)?;
    let psi = lift_vortices(&h, &vs, &LiftOptions::default())?;
    Ok(Initial {
        psi,
        hydro: Some(HydroData::Periodic(h)),
        loop_radius: 0.25 * vs.alpha(),
        vortices: vs.vortices().to_vec(),
    })
}
