use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::fields::{ComplexField, Spectral};

use super::nonlinearity;

/// Strang split-step Fourier integrator on the periodic box.
///
/// One step is `N(dt/2) K(dt) N(dt/2)` where `N` is the exact nonlinear
/// phase rotation (it leaves `|psi|` unchanged) and `K` the free propagator.
#[derive(Clone, Debug)]
pub struct SplitStepper {
    spectral: Spectral,
    kinetic: Vec<Complex64>,
    dt: f64,
    gamma: f64,
    pressure: bool,
}

impl SplitStepper {
    pub fn new(spectral: Spectral, dt: f64, gamma: f64, pressure: bool) -> Self {
        let kinetic = spectral
            .k_squared()
            .iter()
            .map(|k2| Complex64::from_polar(1.0, -0.5 * k2 * dt))
            .collect();
        Self {
            spectral,
            kinetic,
            dt,
            gamma,
            pressure,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rotate(&self, psi: &mut [Complex64], tau: f64) {
        if !self.pressure {
            return;
        }
        let g = self.gamma;
        psi.par_iter_mut().for_each(|z| {
            let phase = -nonlinearity(z.norm_sqr(), g) * tau;
            *z *= Complex64::from_polar(1.0, phase);
        });
    }

    fn kick(&self, psi: &mut [Complex64]) {
        let mut spec = self.spectral.forward(psi);
        spec.par_iter_mut()
            .zip(&self.kinetic)
            .for_each(|(s, k)| *s *= k);
        self.spectral.inverse_in_place(&mut spec);
        psi.copy_from_slice(&spec);
    }

    pub fn step(&self, psi: &mut ComplexField) -> Result<()> {
        self.advance(psi, 1)
    }

    /// `m` consecutive steps with the inner half-step rotations fused.
    pub fn advance(&self, psi: &mut ComplexField, m: usize) -> Result<()> {
        if m == 0 {
            return Ok(());
        }
        let v = &mut psi.values;
        self.rotate(v, 0.5 * self.dt);
        for s in 0..m {
            self.kick(v);
            let tau = if s + 1 == m { 0.5 * self.dt } else { self.dt };
            self.rotate(v, tau);
        }
        Ok(())
    }
}
