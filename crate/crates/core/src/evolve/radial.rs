use num_complex::Complex64;

use crate::error::{QhdError, Result};
use crate::fields::radial::solve_tridiagonal;
use crate::fields::{ComplexField, Grid, RadialOperator};

use super::nonlinearity;

/// Crank–Nicolson integrator for the radial equation.
///
/// The nonlinear potential is taken at the midpoint density: a predictor
/// uses `|psi^n|^2`, one fixed-point correction uses the average of the old
/// and predicted densities.
#[derive(Clone, Debug)]
pub struct RadialStepper {
    grid: Grid,
    op: RadialOperator,
    dt: f64,
    gamma: f64,
    pressure: bool,
    contraction: f64,
}

impl RadialStepper {
    pub fn new(grid: Grid, dt: f64, gamma: f64, pressure: bool) -> Result<Self> {
        Ok(Self {
            grid,
            op: RadialOperator::new(&grid)?,
            dt,
            gamma,
            pressure,
            contraction: 0.5,
        })
    }

    /// Required ratio of corrected to predicted defect (default 0.5).
    pub fn with_contraction(mut self, factor: f64) -> Self {
        self.contraction = factor;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn potential(&self, rho: &[f64]) -> Vec<f64> {
        if self.pressure {
            rho.iter().map(|&r| nonlinearity(r, self.gamma)).collect()
        } else {
            vec![0.0; rho.len()]
        }
    }

    /// `H psi` with `H = -1/2 L + V`.
    fn apply_h(&self, v: &[f64], psi: &[Complex64]) -> Vec<Complex64> {
        let lap = self.op.apply(psi);
        lap.iter()
            .zip(psi)
            .zip(v)
            .map(|((l, p), vj)| -0.5 * l + vj * p)
            .collect()
    }

    fn solve(&self, v: &[f64], psi: &[Complex64]) -> Vec<Complex64> {
        let c = Complex64::new(0.0, 0.5 * self.dt);
        let hp = self.apply_h(v, psi);
        let rhs: Vec<Complex64> = psi.iter().zip(&hp).map(|(p, h)| p - c * h).collect();
        let n = psi.len();
        let a: Vec<Complex64> = (0..n).map(|j| c * (-0.5 * self.op.lower[j])).collect();
        let b: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(1.0, 0.0) + c * (-0.5 * self.op.diag[j] + v[j]))
            .collect();
        let u: Vec<Complex64> = (0..n).map(|j| c * (-0.5 * self.op.upper[j])).collect();
        solve_tridiagonal(&a, &b, &u, &rhs)
    }

    /// Defect of the midpoint scheme at a candidate new state.
    fn residual(&self, old: &[Complex64], new: &[Complex64]) -> f64 {
        let rho_mid: Vec<f64> = old
            .iter()
            .zip(new)
            .map(|(a, b)| 0.5 * (a.norm_sqr() + b.norm_sqr()))
            .collect();
        let v = self.potential(&rho_mid);
        let c = Complex64::new(0.0, 0.5 * self.dt);
        let hn = self.apply_h(&v, new);
        let ho = self.apply_h(&v, old);
        let mut acc = 0.0;
        for j in 0..old.len() {
            let d = new[j] + c * hn[j] - (old[j] - c * ho[j]);
            acc += self.grid.radial_weight(j) * d.norm_sqr();
        }
        acc.sqrt()
    }

    /// One step at time `t` (used only for error reporting).
    pub fn step_at(&self, psi: &mut ComplexField, t: f64) -> Result<()> {
        let old = psi.values.clone();
        let rho0: Vec<f64> = old.iter().map(|z| z.norm_sqr()).collect();
        let predicted = self.solve(&self.potential(&rho0), &old);
        if !self.pressure {
            psi.values = predicted;
            return Ok(());
        }
        let rho_mid: Vec<f64> = old
            .iter()
            .zip(&predicted)
            .map(|(a, b)| 0.5 * (a.norm_sqr() + b.norm_sqr()))
            .collect();
        let corrected = self.solve(&self.potential(&rho_mid), &old);
        let before = self.residual(&old, &predicted);
        let after = self.residual(&old, &corrected);
        let scale = old.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if after > self.contraction * before && after > 1e-13 * scale {
            return Err(QhdError::NonConvergence {
                t,
                before,
                after,
                advice: 0.5 * self.dt,
            });
        }
        psi.values = corrected;
        Ok(())
    }

    pub fn step(&self, psi: &mut ComplexField) -> Result<()> {
        self.step_at(psi, f64::NAN)
    }
}
