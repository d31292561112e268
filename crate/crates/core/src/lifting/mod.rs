//! Wave functions with prescribed hydrodynamic data.
//!
//! Four regimes are supported: planar data with quantized point vortices,
//! strictly positive densities in any dimension, spherically symmetric data
//! (through a vanishing regularization), and three-dimensional planar
//! products carrying straight vortex lines.

mod vortex;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use vortex::{periodic_distance, vortex_amplitude, vortex_phase, Vortex, VortexSet};

use crate::error::{QhdError, Result};
use crate::estimates::{circulation, Interpolation};
use crate::fields::{ComplexField, Grid, ScalarField, Spectral, VectorField};
use crate::polar::{irrotationality_residual, HydroFields, RadialHydro, VacuumThreshold};

/// Tolerances of the liftability checks.
#[derive(Clone, Copy, Debug)]
pub struct LiftOptions {
    pub eps_vac: VacuumThreshold,
    /// Allowed `|circulation / 2 pi - k|` around each vortex.
    pub quantization_tol: f64,
    /// Allowed max `|curl(v - grad phase)|` relative to `max |v| / h`, outside cores.
    pub curl_tol: f64,
    /// Allowed relative irrotationality residual for positive data.
    pub irrotationality_tol: f64,
    /// Allowed distance of the mean velocity from the lattice `2 pi m / L`,
    /// in lattice units.
    pub lattice_tol: f64,
    /// Core exclusion radius in grid spacings.
    pub core_cells: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            eps_vac: VacuumThreshold::default(),
            quantization_tol: 0.1,
            curl_tol: 1e-3,
            irrotationality_tol: 1e-6,
            lattice_tol: 0.05,
            core_cells: 4.0,
        }
    }
}

/// Nodes within `radius` (minimum image) of any vortex.
pub fn core_mask(grid: &Grid, vs: &VortexSet, radius: f64) -> Vec<bool> {
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            vs.vortices().iter().any(|v| {
                grid.wrap_delta(x[0] - v.x[0])
                    .hypot(grid.wrap_delta(x[1] - v.x[1]))
                    < radius
            })
        })
        .collect()
}

/// Rounds the mean of `r` to the nearest reciprocal-lattice vector.
fn lattice_mean(r: &VectorField, tol: f64) -> Result<Vec<f64>> {
    let l = r.grid.length;
    let unit = 2.0 * PI / l;
    r.components
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            let m = (mean / unit).round();
            if (mean / unit - m).abs() > tol {
                Err(QhdError::NonLiftable(format!(
                    "mean velocity {mean:.6} is not a lattice wavenumber 2 pi m / L"
                )))
            } else {
                Ok(m * unit)
            }
        })
        .collect()
}

fn assemble(sqrt_rho: &ScalarField, phase: impl Fn(usize) -> f64) -> ComplexField {
    ComplexField {
        grid: sqrt_rho.grid,
        values: sqrt_rho
            .values
            .iter()
            .enumerate()
            .map(|(i, &a)| Complex64::from_polar(a, phase(i)))
            .collect(),
    }
}

/// Lifts planar data whose vorticity is concentrated on quantized point vortices.
pub fn lift_vortices(h: &HydroFields, vs: &VortexSet, opts: &LiftOptions) -> Result<ComplexField> {
    let grid = *h.grid();
    grid.require_dim(2)?;
    vs.validate_on(&grid)?;
    let spacing = grid.spacing();
    let eps = h.threshold(opts.eps_vac);

    // Vacuum is tolerated only next to a vortex.
    let near = core_mask(&grid, vs, 1.5 * spacing);
    if let Some(i) = (0..grid.len()).find(|&i| !(h.sqrt_rho.values[i] >= eps && h.sqrt_rho.values[i] > 0.0) && !near[i]) {
        return Err(QhdError::NonLiftable(format!(
            "vacuum node at {:?} is not attached to a vortex",
            &grid.position(i)[..2]
        )));
    }

    let radius = (vs.alpha() / 3.0).max(3.0 * spacing).min(0.45 * vs.alpha().max(6.0 * spacing));
    for (index, v) in vs.vortices().iter().enumerate() {
        let c = circulation(h, v.x, radius, opts.eps_vac, Interpolation::Bilinear)?;
        let measured = c.raw / (2.0 * PI);
        if (measured - v.k as f64).abs() > opts.quantization_tol {
            return Err(QhdError::QuantizationViolation {
                index,
                measured,
                expected: v.k,
            });
        }
    }

    let (theta, grad_theta) = vortex_phase(&grid, vs)?;
    let v = h.velocity(opts.eps_vac);
    let mut r = v.clone();
    for (rc, gc) in r.components.iter_mut().zip(&grad_theta.components) {
        for (x, g) in rc.iter_mut().zip(gc) {
            *x -= g;
        }
    }
    // On vacuum nodes the residual is undefined. Fill it from the defined
    // neighbours (fourth-order axial extrapolation when available) so the
    // smooth remainder carries no spike.
    let mask = h.mask(opts.eps_vac);
    for i in (0..grid.len()).filter(|&i| !mask[i]) {
        let ring = |step: isize| {
            [
                grid.shift(i, 0, step),
                grid.shift(i, 0, -step),
                grid.shift(i, 1, step),
                grid.shift(i, 1, -step),
            ]
        };
        let (near, far) = (ring(1), ring(2));
        let axial = near.iter().chain(&far).all(|&j| mask[j]);
        let mut block = Vec::with_capacity(8);
        for dx in -1..=1isize {
            for dy in -1..=1isize {
                let j = grid.shift(grid.shift(i, 0, dx), 1, dy);
                if mask[j] {
                    block.push(j);
                }
            }
        }
        for c in &mut r.components {
            c[i] = if axial {
                let m1 = near.iter().map(|&j| c[j]).sum::<f64>() / 4.0;
                let m2 = far.iter().map(|&j| c[j]).sum::<f64>() / 4.0;
                (4.0 * m1 - m2) / 3.0
            } else if block.is_empty() {
                0.0
            } else {
                block.iter().map(|&j| c[j]).sum::<f64>() / block.len() as f64
            };
        }
    }

    let sp = Spectral::new(grid)?;
    let curl = sp.curl2d(&r)?;
    let cores = core_mask(&grid, vs, opts.core_cells * spacing);
    let vmax = v.magnitude_sq().max_abs().sqrt().max(1e-300);
    let worst = curl
        .values
        .iter()
        .zip(&cores)
        .filter(|(_, c)| !**c)
        .fold(0.0f64, |m, (x, _)| m.max(x.abs()));
    if worst > opts.curl_tol * vmax / spacing {
        return Err(QhdError::NonLiftable(format!(
            "velocity minus vortex phase gradient has curl {worst:.3e} away from the cores"
        )));
    }

    let u = lattice_mean(&r, opts.lattice_tol)?;
    let s = sp.gradient_potential(&r)?;
    Ok(assemble(&h.sqrt_rho, |i| {
        let x = grid.position(i);
        theta.values[i] + s.values[i] + u[0] * x[0] + u[1] * x[1]
    }))
}

/// Lifts data with a strictly positive density and irrotational velocity.
pub fn lift_positive(h: &HydroFields, eps_pos: f64, opts: &LiftOptions) -> Result<ComplexField> {
    let grid = *h.grid();
    grid.require_periodic()?;
    let min = h.sqrt_rho.min();
    if !(min >= eps_pos && min > 0.0) {
        return Err(QhdError::NotPositive {
            min,
            floor: eps_pos,
        });
    }
    let sp = Spectral::new(grid)?;
    let v = h.velocity(VacuumThreshold::Absolute(0.0));
    if grid.dim >= 2 {
        let res = irrotationality_residual(h)?.l2();
        let j = h.current();
        // The lowest lattice wavenumber times |J| bounds the curl of any
        // rotational field of that size from below, so radially symmetric
        // data (curl J close to zero) are not judged against round-off.
        let curl = match grid.dim {
            2 => sp.curl2d(&j)?.norm(),
            _ => sp.curl3d(&j)?.norm(),
        };
        let scale = curl.max(2.0 * PI / grid.length * j.norm());
        if res > opts.irrotationality_tol * scale.max(1e-300) && res > 1e-12 {
            return Err(QhdError::NonLiftable(format!(
                "irrotationality residual {res:.3e} (reference curl size {scale:.3e})"
            )));
        }
    }
    let u = lattice_mean(&v, opts.lattice_tol)?;
    let s = sp.gradient_potential(&v)?;
    Ok(assemble(&h.sqrt_rho, |i| {
        let x = grid.position(i);
        s.values[i] + (0..grid.dim).map(|a| u[a] * x[a]).sum::<f64>()
    }))
}

/// Regularization profile `e^{-r^2/2} / n`.
pub fn regularizer(r: f64, n_reg: u32) -> f64 {
    (-0.5 * r * r).exp() / n_reg as f64
}

/// Lifts spherically symmetric data after adding the positive regularizer.
///
/// The phase is the cumulative trapezoid integral of
/// `Lambda sqrt_rho / (sqrt_rho + delta_n)^2` from the first radial node.
pub fn lift_radial(h: &RadialHydro, n_reg: u32) -> Result<ComplexField> {
    let grid = *h.grid();
    grid.require_radial()?;
    if n_reg == 0 {
        return Err(QhdError::Range {
            what: "regularization index",
            detail: "n_reg must be at least 1".into(),
        });
    }
    let radii = grid.radii();
    let amp: Vec<f64> = radii
        .iter()
        .zip(&h.sqrt_rho.values)
        .map(|(&r, &a)| a + regularizer(r, n_reg))
        .collect();
    let vel: Vec<f64> = (0..grid.n)
        .map(|j| h.lambda[j] * h.sqrt_rho.values[j] / (amp[j] * amp[j]))
        .collect();
    let dr = grid.spacing();
    let mut phase = vec![0.0; grid.n];
    for j in 1..grid.n {
        phase[j] = phase[j - 1] + 0.5 * dr * (vel[j] + vel[j - 1]);
    }
    ComplexField::new(
        grid,
        amp.iter()
            .zip(&phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect(),
    )
}

/// Tensor product `psi1(x1, x2) * sqrt_rho2(x3)` on the matching cubic grid.
pub fn lift_planar_product(psi1: &ComplexField, sqrt_rho2: &ScalarField) -> Result<ComplexField> {
    let g1 = psi1.grid;
    g1.require_dim(2)?;
    sqrt_rho2.grid.require_dim(1)?;
    if sqrt_rho2.grid.n != g1.n || sqrt_rho2.grid.length != g1.length {
        return Err(QhdError::GridMismatch(
            "profile grid must share n and L with the planar grid".into(),
        ));
    }
    if sqrt_rho2.values.iter().any(|v| !(*v >= 0.0)) {
        return Err(QhdError::Domain("sqrt_rho2 must be nonnegative".into()));
    }
    let grid = Grid::periodic(3, g1.n, g1.length)?;
    let n = g1.n;
    let values = (0..grid.len())
        .map(|i| psi1.values[i / n] * sqrt_rho2.values[i % n])
        .collect();
    ComplexField::new(grid, values)
}

/// Relative `L^2` error between two hydrodynamic states over nodes where
/// `keep` holds, combining both components.
pub fn relative_error(reference: &HydroFields, other: &HydroFields, keep: &[bool]) -> Result<f64> {
    reference.grid().check_same(other.grid())?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in (0..keep.len()).filter(|&i| keep[i]) {
        let a = reference.sqrt_rho.values[i];
        num += (a - other.sqrt_rho.values[i]).powi(2);
        den += a * a;
        for (ra, oa) in reference.lambda.components.iter().zip(&other.lambda.components) {
            num += (ra[i] - oa[i]).powi(2);
            den += ra[i] * ra[i];
        }
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

/// Relative error of a radial pair in `L^2(r^{d-1} dr)`.
pub fn relative_error_radial(reference: &RadialHydro, other: &RadialHydro) -> Result<f64> {
    let (ds, dl) = reference.distance(other)?;
    let (ns, nl) = reference.norm();
    Ok(((ds * ds + dl * dl) / (ns * ns + nl * nl)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{madelung, madelung_radial};

    fn pair_set(l: f64) -> VortexSet {
        VortexSet::new(
            vec![
                Vortex { x: [-l / 4.0, 0.0], k: 1 },
                Vortex { x: [l / 4.0, 0.0], k: -1 },
            ],
            l / 4.0,
        )
        .unwrap()
    }

    fn pair_state(grid: Grid, vs: &VortexSet) -> ComplexField {
        let amp = vortex_amplitude(&grid, vs, 1.0).unwrap();
        let (theta, _) = vortex_phase(&grid, vs).unwrap();
        let w = 2.0 * PI / grid.length;
        assemble(&amp, |i| {
            let x = grid.position(i);
            theta.values[i] + 0.3 * (w * x[1]).sin()
        })
    }

    #[test]
    fn pure_gradient_flow_without_vortices() {
        let grid = Grid::periodic(2, 64, 8.0).unwrap();
        let w = 2.0 * PI / 8.0;
        let s = ScalarField::from_fn(grid, |x| (w * x[0]).cos());
        let sp = Spectral::new(grid).unwrap();
        let h = HydroFields::new(ScalarField::constant(grid, 1.0), sp.gradient(&s).unwrap()).unwrap();
        let psi = lift_vortices(&h, &VortexSet::empty(), &LiftOptions::default()).unwrap();
        let back = madelung(&psi, VacuumThreshold::default()).unwrap();
        let keep = vec![true; grid.len()];
        assert!(relative_error(&h, &back, &keep).unwrap() < 1e-8);
        let shift = psi.values[0] / Complex64::from_polar(1.0, s.values[0]);
        for (i, z) in psi.values.iter().enumerate() {
            assert!((z - shift * Complex64::from_polar(1.0, s.values[i])).norm() < 1e-10);
        }
    }

    #[test]
    fn vortex_pair_round_trip() {
        let l = 16.0;
        let grid = Grid::periodic(2, 128, l).unwrap();
        let vs = pair_set(l);
        let psi0 = pair_state(grid, &vs);
        let h = madelung(&psi0, VacuumThreshold::default()).unwrap();
        let psi = lift_vortices(&h, &vs, &LiftOptions::default()).unwrap();
        let back = madelung(&psi, VacuumThreshold::default()).unwrap();
        let keep: Vec<bool> = core_mask(&grid, &vs, 4.0 * grid.spacing())
            .iter()
            .map(|c| !c)
            .collect();
        let err = relative_error(&h, &back, &keep).unwrap();
        assert!(err < 1e-8, "err {err}");
        assert!((psi.norm_sq() - h.sqrt_rho.norm_sq()).abs() < 1e-12 * psi.norm_sq());
    }

    #[test]
    fn same_sign_pair_is_rejected() {
        let grid = Grid::periodic(2, 64, 16.0).unwrap();
        let psi0 = ComplexField::from_fn(grid, |x| {
            Complex64::new(x[0] - 2.0, x[1])
                * Complex64::new(x[0] + 2.0, x[1])
                * (-0.5 * (x[0] * x[0] + x[1] * x[1]) / 4.0).exp()
        });
        let h = madelung(&psi0, VacuumThreshold::default()).unwrap();
        let vs = VortexSet::new(
            vec![Vortex { x: [2.0, 0.0], k: 1 }, Vortex { x: [-2.0, 0.0], k: 1 }],
            1.0,
        )
        .unwrap();
        assert!(matches!(
            lift_vortices(&h, &vs, &LiftOptions::default()),
            Err(QhdError::WindingSum(2))
        ));
    }

    #[test]
    fn wrong_winding_is_a_quantization_violation() {
        let l = 16.0;
        let grid = Grid::periodic(2, 64, l).unwrap();
        let vs = pair_set(l);
        let h = madelung(&pair_state(grid, &vs), VacuumThreshold::default()).unwrap();
        let flipped = VortexSet::new(
            vec![
                Vortex { x: [-l / 4.0, 0.0], k: -1 },
                Vortex { x: [l / 4.0, 0.0], k: 1 },
            ],
            1.0,
        )
        .unwrap();
        assert!(matches!(
            lift_vortices(&h, &flipped, &LiftOptions::default()),
            Err(QhdError::QuantizationViolation { index: 0, .. })
        ));
    }

    #[test]
    fn positive_lifts() {
        let grid = Grid::periodic(2, 64, 6.0).unwrap();
        let opts = LiftOptions::default();
        let unit = HydroFields::new(ScalarField::constant(grid, 1.0), VectorField::zeros(grid)).unwrap();
        let psi = lift_positive(&unit, 0.5, &opts).unwrap();
        assert!(psi.values.iter().all(|z| (z - psi.values[0]).norm() < 1e-14));

        let w = 2.0 * PI / 6.0;
        let psi0 = ComplexField::from_fn(grid, |x| Complex64::from_polar(1.0, (w * x[1]).sin()));
        let h = madelung(&psi0, VacuumThreshold::default()).unwrap();
        let back = madelung(&lift_positive(&h, 0.5, &opts).unwrap(), VacuumThreshold::default()).unwrap();
        assert!(relative_error(&h, &back, &vec![true; grid.len()]).unwrap() < 1e-8);

        let rot = HydroFields::new(
            ScalarField::constant(grid, 1.0),
            VectorField::from_fn(grid, |x| [-(w * x[1]).sin() / w, (w * x[0]).sin() / w, 0.0]),
        )
        .unwrap();
        assert!(matches!(lift_positive(&rot, 0.5, &opts), Err(QhdError::NonLiftable(_))));
        let holed = HydroFields::new(ScalarField::from_fn(grid, |x| x[0].abs()), VectorField::zeros(grid)).unwrap();
        assert!(matches!(lift_positive(&holed, 0.1, &opts), Err(QhdError::NotPositive { .. })));
    }

    #[test]
    fn shifted_momentum_is_recovered() {
        let grid = Grid::periodic(1, 32, 4.0).unwrap();
        let k = 2.0 * PI / 4.0 * 3.0;
        let psi0 = ComplexField::from_fn(grid, |x| Complex64::from_polar(2.0, k * x[0]));
        let h = madelung(&psi0, VacuumThreshold::default()).unwrap();
        let back = madelung(&lift_positive(&h, 1.0, &LiftOptions::default()).unwrap(), VacuumThreshold::default()).unwrap();
        assert!(relative_error(&h, &back, &vec![true; 32]).unwrap() < 1e-12);
    }

    #[test]
    fn radial_outflow_phase() {
        let grid = Grid::radial(2, 2000, 10.0).unwrap();
        let sqrt_rho = ScalarField::from_fn(grid, |r| (-0.5 * r[0] * r[0]).exp());
        let lambda: Vec<f64> = grid.radii().iter().zip(&sqrt_rho.values).map(|(r, a)| r * a).collect();
        let h = RadialHydro::new(sqrt_rho, lambda).unwrap();
        let r0 = grid.radius(0);
        let mut prev = f64::INFINITY;
        for n in [10u32, 100, 1000, 10000] {
            let psi = lift_radial(&h, n).unwrap();
            // Closed-form phase (r^2 - r0^2) / (2 (1 + 1/n)^2).
            let c = 1.0 / (1.0 + 1.0 / n as f64).powi(2);
            for j in (0..grid.n).step_by(97) {
                let r = grid.radius(j);
                let exact = 0.5 * c * (r * r - r0 * r0);
                let unit = psi.values[j] / psi.values[j].norm();
                assert!((unit - Complex64::from_polar(1.0, exact)).norm() < 1e-5, "n={n} j={j}");
            }
            let back = madelung_radial(&psi, VacuumThreshold::default()).unwrap();
            let err = relative_error_radial(&h, &back).unwrap();
            assert!(err < 0.6 * prev, "n={n}: {err} vs {prev}");
            prev = err;
        }
    }

    #[test]
    fn radial_zero_current_is_real() {
        let grid = Grid::radial(3, 50, 5.0).unwrap();
        let h = RadialHydro::new(ScalarField::from_fn(grid, |r| (-r[0]).exp()), vec![0.0; 50]).unwrap();
        let psi = lift_radial(&h, 7).unwrap();
        for (j, z) in psi.values.iter().enumerate() {
            let r = grid.radius(j);
            assert_eq!(z.im, 0.0);
            assert!((z.re - (-r).exp() - regularizer(r, 7)).abs() < 1e-15);
        }
    }

    #[test]
    fn planar_product_structure() {
        let g2 = Grid::periodic(2, 16, 8.0).unwrap();
        let g1 = Grid::periodic(1, 16, 8.0).unwrap();
        let psi1 = ComplexField::from_fn(g2, |x| Complex64::new(x[0], x[1]) * (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp());
        let prof = ScalarField::from_fn(g1, |x| (-x[0] * x[0] / 2.0).exp());
        let psi = lift_planar_product(&psi1, &prof).unwrap();
        let expect = psi1.norm() * prof.norm();
        assert!((psi.norm() - expect).abs() < 1e-12 * expect);
        let h = madelung(&psi, VacuumThreshold::default()).unwrap();
        assert!(h.lambda.components[2].iter().all(|v| v.abs() < 1e-12));
    }
}
