use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};
use crate::fields::{Grid, ScalarField, VectorField};

/// A point vortex with integer winding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub x: [f64; 2],
    pub k: i32,
}

/// Point vortices with a minimum pairwise separation.
#[derive(Clone, Debug, PartialEq)]
pub struct VortexSet {
    vortices: Vec<Vortex>,
    alpha: f64,
}

impl VortexSet {
    pub fn new(vortices: Vec<Vortex>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(QhdError::InvalidVortexSet(format!(
                "minimum separation must be positive, got {alpha}"
            )));
        }
        if let Some(i) = vortices.iter().position(|v| v.k == 0) {
            return Err(QhdError::InvalidVortexSet(format!("vortex {i} has zero winding")));
        }
        let set = Self { vortices, alpha };
        set.check_separation(|a, b| (a[0] - b[0]).hypot(a[1] - b[1]))?;
        Ok(set)
    }

    /// Largest admissible separation parameter for the given vortices.
    pub fn with_natural_separation(vortices: Vec<Vortex>) -> Result<Self> {
        let mut alpha = f64::INFINITY;
        for (i, a) in vortices.iter().enumerate() {
            for b in &vortices[i + 1..] {
                alpha = alpha.min((a.x[0] - b.x[0]).hypot(a.x[1] - b.x[1]));
            }
        }
        if !alpha.is_finite() {
            alpha = 1.0;
        }
        Self::new(vortices, alpha)
    }

    pub fn empty() -> Self {
        Self {
            vortices: Vec::new(),
            alpha: 1.0,
        }
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.vortices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vortices.is_empty()
    }

    pub fn total_winding(&self) -> i64 {
        self.vortices.iter().map(|v| v.k as i64).sum()
    }

    fn check_separation(&self, dist: impl Fn([f64; 2], [f64; 2]) -> f64) -> Result<()> {
        for (i, a) in self.vortices.iter().enumerate() {
            for (j, b) in self.vortices.iter().enumerate().skip(i + 1) {
                let d = dist(a.x, b.x);
                if d < self.alpha {
                    return Err(QhdError::InvalidVortexSet(format!(
                        "vortices {i} and {j} are {d:.4} apart, below alpha = {}",
                        self.alpha
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks the set against a periodic planar grid: positions inside the
    /// box, minimum-image separation, and zero total winding.
    pub fn validate_on(&self, grid: &Grid) -> Result<()> {
        grid.require_dim(2)?;
        let half = 0.5 * grid.length;
        for (i, v) in self.vortices.iter().enumerate() {
            if v.x.iter().any(|c| !(*c >= -half && *c < half)) {
                return Err(QhdError::InvalidVortexSet(format!(
                    "vortex {i} at {:?} lies outside the box [-{half}, {half})^2",
                    v.x
                )));
            }
        }
        self.check_separation(|a, b| {
            grid.wrap_delta(a[0] - b[0]).hypot(grid.wrap_delta(a[1] - b[1]))
        })?;
        let total = self.total_winding();
        if total != 0 {
            return Err(QhdError::WindingSum(total));
        }
        Ok(())
    }
}

const NOME: f64 = 0.043_213_918_263_772_25; // e^{-pi}
const TERMS: usize = 12;

/// Jacobi `theta_1(u | i)` and its derivative.
fn theta1(u: Complex64) -> (Complex64, Complex64) {
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for n in 0..TERMS {
        let m = (2 * n + 1) as f64;
        let c = NOME.powf((n as f64 + 0.5).powi(2)) * if n % 2 == 0 { 2.0 } else { -2.0 };
        value += c * (m * u).sin();
        deriv += c * m * (m * u).cos();
    }
    (value, deriv)
}

fn theta1_prime_zero() -> f64 {
    theta1(Complex64::new(0.0, 0.0)).1.re
}

fn reduced(grid: &Grid, x: [f64; 3], centre: [f64; 2]) -> Complex64 {
    Complex64::new(x[0] - centre[0], x[1] - centre[1]) * (PI / grid.length)
}

/// Periodic analogue of `|x - centre|` on the torus.
///
/// Equals the Euclidean distance to leading order near the centre, is smooth
/// in its square, and makes `tanh(d / xi) e^{i theta}` a smooth vortex core.
pub fn periodic_distance(grid: &Grid, x: [f64; 3], centre: [f64; 2]) -> f64 {
    let u = reduced(grid, x, centre);
    let m = theta1(u).0.norm() * (-u.im * u.im / PI).exp();
    grid.length * m / (PI * theta1_prime_zero())
}

/// Doubly periodic multi-vortex phase and its gradient.
///
/// The phase is `sum_j k_j arg theta_1(pi (z - z_j)/L) - 2 pi X y / L^2` with
/// `X = sum_j k_j x_j`; it is single valued modulo `2 pi` whenever the total
/// winding vanishes. The gradient is analytic and set to zero on nodes that
/// coincide with a vortex.
pub fn vortex_phase(grid: &Grid, vs: &VortexSet) -> Result<(ScalarField, VectorField)> {
    vs.validate_on(grid)?;
    let l = grid.length;
    let big_x: f64 = vs.vortices().iter().map(|v| v.k as f64 * v.x[0]).sum();
    let mut phase = vec![0.0; grid.len()];
    let mut gx = vec![0.0; grid.len()];
    let mut gy = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let x = grid.position(i);
        let mut p = -2.0 * PI * big_x * x[1] / (l * l);
        let (mut ax, mut ay) = (0.0, -2.0 * PI * big_x / (l * l));
        let mut on_core = false;
        for v in vs.vortices() {
            let u = reduced(grid, x, v.x);
            let (t, dt) = theta1(u);
            if t.norm() == 0.0 {
                on_core = true;
                continue;
            }
            let k = v.k as f64;
            p += k * t.arg();
            let g = dt / t * (PI / l);
            ax += k * g.im;
            ay += k * g.re;
        }
        phase[i] = (p + PI).rem_euclid(2.0 * PI) - PI;
        if !on_core {
            gx[i] = ax;
            gy[i] = ay;
        }
    }
    Ok((
        ScalarField::new(*grid, phase)?,
        VectorField::new(*grid, vec![gx, gy])?,
    ))
}

/// Smooth vortex amplitude `prod_j tanh(d_j / xi)` built on [`periodic_distance`].
pub fn vortex_amplitude(grid: &Grid, vs: &VortexSet, core: f64) -> Result<ScalarField> {
    grid.require_dim(2)?;
    Ok(ScalarField::from_fn(*grid, |x| {
        vs.vortices()
            .iter()
            .map(|v| (periodic_distance(grid, x, v.x) / core).tanh())
            .product()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Spectral;

    fn pair(l: f64) -> VortexSet {
        VortexSet::new(
            vec![
                Vortex { x: [-l / 4.0, 0.0], k: 1 },
                Vortex { x: [l / 4.0, 0.0], k: -1 },
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(VortexSet::new(vec![Vortex { x: [0.0, 0.0], k: 0 }], 1.0).is_err());
        let close = vec![
            Vortex { x: [0.0, 0.0], k: 1 },
            Vortex { x: [0.5, 0.0], k: -1 },
        ];
        assert!(VortexSet::new(close, 1.0).is_err());
        let grid = Grid::periodic(2, 32, 10.0).unwrap();
        let same = VortexSet::new(
            vec![
                Vortex { x: [-2.0, 0.0], k: 1 },
                Vortex { x: [2.0, 0.0], k: 1 },
            ],
            1.0,
        )
        .unwrap();
        assert!(matches!(same.validate_on(&grid), Err(QhdError::WindingSum(2))));
        // Close only through the periodic boundary.
        let wrapped = VortexSet::new(
            vec![
                Vortex { x: [-4.8, 0.0], k: 1 },
                Vortex { x: [4.8, 0.0], k: -1 },
            ],
            1.0,
        )
        .unwrap();
        assert!(wrapped.validate_on(&grid).is_err());
    }

    #[test]
    fn theta_is_odd_and_quasi_periodic() {
        let u = Complex64::new(0.3, 0.2);
        let (a, _) = theta1(u);
        let (b, _) = theta1(-u);
        assert!((a + b).norm() < 1e-15);
        let (c, _) = theta1(u + PI);
        assert!((a + c).norm() < 1e-14);
        let (d, _) = theta1(u + Complex64::new(0.0, PI));
        let expect = -a * (Complex64::new(0.0, -2.0) * u).exp() / NOME;
        assert!((d - expect).norm() < 1e-12 * d.norm());
    }

    #[test]
    fn distance_is_periodic_and_local() {
        let grid = Grid::periodic(2, 16, 8.0).unwrap();
        let c = [1.0, -0.5];
        let d0 = periodic_distance(&grid, [1.3, -0.1, 0.0], c);
        assert!((d0 - 0.3f64.hypot(0.4)).abs() < 2e-2 * 0.5, "{d0}");
        let d1 = periodic_distance(&grid, [1.3 + 8.0, -0.1, 0.0], c);
        let d2 = periodic_distance(&grid, [1.3, -0.1 - 8.0, 0.0], c);
        assert!((d0 - d1).abs() < 1e-12 && (d0 - d2).abs() < 1e-12);
    }

    #[test]
    fn phase_is_periodic_with_matching_gradient() {
        let grid = Grid::periodic(2, 64, 16.0).unwrap();
        let vs = pair(16.0);
        let (phase, grad) = vortex_phase(&grid, &vs).unwrap();
        // The smooth vortex state amp * e^{i phase} has velocity grad(phase).
        let sp = Spectral::new(grid).unwrap();
        let amp = vortex_amplitude(&grid, &vs, 1.0).unwrap();
        let w = crate::fields::ComplexField {
            grid,
            values: phase
                .values
                .iter()
                .zip(&amp.values)
                .map(|(p, a)| Complex64::from_polar(*a, *p))
                .collect(),
        };
        let dw = sp.gradient_complex(&w).unwrap();
        for i in 0..grid.len() {
            let x = grid.position(i);
            let r = vs
                .vortices()
                .iter()
                .map(|v| (x[0] - v.x[0]).hypot(x[1] - v.x[1]))
                .fold(f64::INFINITY, f64::min);
            if r > 3.0 {
                for a in 0..2 {
                    let spectral = (w.values[i].conj() * dw[a].values[i]).im / amp.values[i].powi(2);
                    assert!((spectral - grad.components[a][i]).abs() < 1e-6, "{i} {a}");
                }
            }
        }
    }
}
