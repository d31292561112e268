//! Time integration of the defocusing NLS `i dt psi = -1/2 lap psi + |psi|^{2(gamma-1)} psi`.
//!
//! Periodic grids use a Strang split-step Fourier scheme; radial grids use
//! Crank–Nicolson with a midpoint nonlinearity.

mod radial;
mod split;

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};
use crate::estimates::check_gamma;
use crate::fields::{ComplexField, Grid, RadialOperator, Spectral};
use crate::functionals::DiagnosticsRecord;

pub use radial::RadialStepper;
pub use split::SplitStepper;

/// `rho^(gamma-1)`, the enthalpy derivative of the power-law pressure.
pub fn nonlinearity(rho: f64, gamma: f64) -> f64 {
    let e = gamma - 1.0;
    if e == e.round() && e.abs() <= 8.0 {
        rho.powi(e as i32)
    } else {
        (e * rho.max(1e-300).ln()).exp()
    }
}

/// Capillarity law used by the Euler–Korteweg diagnostics. Evolution is
/// always the quantum one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum KappaMode {
    #[default]
    Qhd,
    Constant(f64),
}

impl std::str::FromStr for KappaMode {
    type Err = String;

    /// `qhd` or `constant:<c>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "qhd" => Ok(Self::Qhd),
            other => other
                .strip_prefix("constant:")
                .and_then(|c| c.trim().parse::<f64>().ok())
                .map(Self::Constant)
                .ok_or_else(|| format!("expected `qhd` or `constant:<c>`, found `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub pressure_enabled: bool,
    #[serde(default)]
    pub kappa_mode: KappaMode,
    /// Keep a copy of the state at every observation point.
    #[serde(default = "yes")]
    pub keep_snapshots: bool,
}

fn yes() -> bool {
    true
}

impl SolverConfig {
    pub fn new(gamma: f64, dt: f64, t_end: f64) -> Self {
        Self {
            gamma,
            dt,
            t_end,
            snapshot_stride: 1,
            pressure_enabled: true,
            kappa_mode: KappaMode::Qhd,
            keep_snapshots: true,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn without_pressure(mut self) -> Self {
        self.pressure_enabled = false;
        self
    }

    pub fn discard_snapshots(mut self) -> Self {
        self.keep_snapshots = false;
        self
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QhdError::Range {
                what: "dt",
                detail: format!("must be positive and finite, got {}", self.dt),
            });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(QhdError::Range {
                what: "t_end",
                detail: format!("must be non-negative, got {}", self.t_end),
            });
        }
        if self.snapshot_stride == 0 {
            return Err(QhdError::Range {
                what: "snapshot_stride",
                detail: "must be at least 1".into(),
            });
        }
        if let KappaMode::Constant(c) = self.kappa_mode {
            if !(c > 0.0 && c.is_finite()) {
                return Err(QhdError::Range {
                    what: "kappa",
                    detail: format!("constant capillarity must be positive, got {c}"),
                });
            }
        }
        check_gamma(grid.dim, self.gamma)
    }

    /// Advisory only: the linear part of both steppers is unconditionally stable.
    pub fn exceeds_cfl(&self, grid: &Grid) -> bool {
        let h = grid.spacing();
        self.dt > h * h / std::f64::consts::PI
    }

    /// Number of steps and the step actually used so that they land on `t_end`.
    pub fn schedule(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let exact = self.t_end / self.dt;
        let n = exact.round();
        if n >= 1.0 && (n - exact).abs() <= 1e-9 * exact {
            (n as usize, self.t_end / n)
        } else {
            let n = exact.ceil().max(1.0);
            (n as usize, self.t_end / n)
        }
    }
}

/// Time stepper for either grid kind.
#[derive(Clone, Debug)]
pub enum Stepper {
    Split(SplitStepper),
    Radial(RadialStepper),
}

impl Stepper {
    /// Negative `dt` integrates backwards.
    pub fn new(grid: Grid, dt: f64, gamma: f64, pressure: bool) -> Result<Self> {
        if grid.is_periodic() {
            Ok(Stepper::Split(SplitStepper::new(Spectral::new(grid)?, dt, gamma, pressure)))
        } else {
            Ok(Stepper::Radial(RadialStepper::new(grid, dt, gamma, pressure)?))
        }
    }

    pub fn for_config(grid: Grid, cfg: &SolverConfig, dt: f64) -> Result<Self> {
        Self::new(grid, dt, cfg.gamma, cfg.pressure_enabled)
    }

    pub fn step(&self, psi: &mut ComplexField) -> Result<()> {
        self.advance(psi, 1, f64::NAN)
    }

    /// `m` steps starting at time `t0`.
    pub fn advance(&self, psi: &mut ComplexField, m: usize, t0: f64) -> Result<()> {
        match self {
            Stepper::Split(s) => s.advance(psi, m),
            Stepper::Radial(r) => {
                for s in 0..m {
                    r.step_at(psi, t0 + s as f64 * r.dt())?;
                    if !psi.values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                        return Err(QhdError::BlowUp {
                            t: t0 + (s + 1) as f64 * r.dt(),
                            last_good: t0 + s as f64 * r.dt(),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// `dt psi = i (1/2 lap psi - |psi|^{2(gamma-1)} psi)` evaluated from the equation.
pub fn dt_psi(psi: &ComplexField, gamma: f64, pressure: bool) -> Result<ComplexField> {
    let lap = if psi.grid.is_periodic() {
        Spectral::new(psi.grid)?.laplacian_complex(psi)?
    } else {
        let op = RadialOperator::new(&psi.grid)?;
        ComplexField::new(psi.grid, op.apply(&psi.values))?
    };
    let i = Complex64::new(0.0, 1.0);
    let values = lap
        .values
        .iter()
        .zip(&psi.values)
        .map(|(l, p)| {
            let v = if pressure { nonlinearity(p.norm_sqr(), gamma) } else { 0.0 };
            i * (0.5 * l - v * p)
        })
        .collect();
    ComplexField::new(psi.grid, values)
}

/// Callback run at every observation point of [`evolve`].
pub trait Observer {
    fn observe(&mut self, t: f64, psi: &ComplexField) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(f64, &ComplexField) -> Result<()>,
{
    fn observe(&mut self, t: f64, psi: &ComplexField) -> Result<()> {
        self(t, psi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub dt_used: f64,
    pub wall_seconds: f64,
    pub observer_seconds: f64,
    pub cfl_exceeded: bool,
    /// Observation points where the radial boundary density exceeded 1e-12 of the maximum.
    pub boundary_warnings: usize,
}

/// States at the observation times of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ComplexField>,
    pub config: SolverConfig,
    pub records: Vec<DiagnosticsRecord>,
    pub stats: RunStats,
    pub final_state: ComplexField,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

fn boundary_leaks(psi: &ComplexField) -> bool {
    if !psi.grid.is_radial() {
        return false;
    }
    let max = psi.values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let edge = psi.values.last().map(|z| z.norm_sqr()).unwrap_or(0.0);
    max > 0.0 && edge > 1e-12 * max
}

/// Integrates `psi0` to `config.t_end`, calling every observer at `t = 0`,
/// every `snapshot_stride` steps and at the final time.
pub fn evolve(
    psi0: &ComplexField,
    config: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    let grid = psi0.grid;
    config.validate(&grid)?;
    if !psi0.is_finite() {
        return Err(QhdError::BlowUp { t: 0.0, last_good: f64::NAN });
    }
    let start = Instant::now();
    let (steps, dt) = config.schedule();
    let mut stats = RunStats {
        steps,
        dt_used: dt,
        cfl_exceeded: config.exceeds_cfl(&grid),
        ..Default::default()
    };
    if stats.cfl_exceeded {
        log::info!("dt = {dt:e} exceeds the advisory bound h^2/pi");
    }
    let stepper = Stepper::for_config(grid, config, dt)?;

    let mut psi = psi0.clone();
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut observe = |t: f64, psi: &ComplexField, stats: &mut RunStats| -> Result<()> {
        let t0 = Instant::now();
        if boundary_leaks(psi) {
            stats.boundary_warnings += 1;
            log::warn!("radial boundary density above 1e-12 of max at t = {t}");
        }
        for obs in observers.iter_mut() {
            obs.observe(t, psi)?;
        }
        times.push(t);
        if config.keep_snapshots {
            snapshots.push(psi.clone());
        }
        stats.observer_seconds += t0.elapsed().as_secs_f64();
        Ok(())
    };

    observe(0.0, &psi, &mut stats)?;
    let mut done = 0;
    while done < steps {
        let m = config.snapshot_stride.min(steps - done);
        let t_before = done as f64 * dt;
        stepper.advance(&mut psi, m, t_before)?;
        done += m;
        let t = done as f64 * dt;
        if !psi.is_finite() {
            return Err(QhdError::BlowUp { t, last_good: t_before });
        }
        observe(t, &psi, &mut stats)?;
    }
    drop(observe);
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(Trajectory {
        times,
        snapshots,
        config: *config,
        records: Vec::new(),
        stats,
        final_state: psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: Grid, w: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            Complex64::new((-r2 / (2.0 * w * w)).exp(), 0.0)
        })
    }

    #[test]
    fn schedule_lands_on_t_end() {
        let c = SolverConfig::new(2.0, 1e-3, 1.0);
        let (n, dt) = c.schedule();
        assert_eq!(n, 1000);
        assert!((dt * n as f64 - 1.0).abs() < 1e-15);
        let c = SolverConfig::new(2.0, 0.3, 1.0);
        let (n, dt) = c.schedule();
        assert_eq!(n, 4);
        assert!(dt <= 0.3);
    }

    #[test]
    fn config_rejects_bad_values() {
        let g3 = Grid::periodic(3, 8, 4.0).unwrap();
        assert!(SolverConfig::new(3.0, 0.1, 1.0).validate(&g3).is_err());
        assert!(SolverConfig::new(1.0, 0.1, 1.0).validate(&g3).is_err());
        assert!(SolverConfig::new(2.0, -0.1, 1.0).validate(&g3).is_err());
        assert!(SolverConfig::new(2.0, 0.1, 1.0).with_stride(0).validate(&g3).is_err());
        assert!(SolverConfig::new(2.0, 0.1, 1.0).validate(&g3).is_ok());
    }

    #[test]
    fn zero_time_returns_initial_state() {
        let grid = Grid::periodic(2, 16, 8.0).unwrap();
        let psi = gaussian(grid, 1.0);
        let tr = evolve(&psi, &SolverConfig::new(2.0, 0.1, 0.0), &mut []).unwrap();
        assert_eq!(tr.times, vec![0.0]);
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.snapshots[0], psi);
    }

    #[test]
    fn observers_see_constant_mass() {
        let grid = Grid::periodic(2, 32, 12.0).unwrap();
        let psi = gaussian(grid, 1.0);
        let mut masses = Vec::new();
        let mut obs = |_: f64, p: &ComplexField| -> Result<()> {
            masses.push(p.norm_sq());
            Ok(())
        };
        let cfg = SolverConfig::new(2.0, 1e-2, 1.0).with_stride(10);
        let tr = evolve(&psi, &cfg, &mut [&mut obs]).unwrap();
        assert_eq!(tr.times.len(), 11);
        for w in tr.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        let m0 = masses[0];
        assert!(masses.iter().all(|m| ((m - m0) / m0).abs() < 1e-12));
    }

    #[test]
    fn time_reversal_and_gauge() {
        let grid = Grid::periodic(2, 32, 12.0).unwrap();
        let psi0 = ComplexField::from_fn(grid, |x| {
            Complex64::from_polar((-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp() * 1.5, 0.3 * x[0])
        });
        let fwd = Stepper::new(grid, 1e-2, 2.0, true).unwrap();
        let back = Stepper::new(grid, -1e-2, 2.0, true).unwrap();
        let mut psi = psi0.clone();
        fwd.advance(&mut psi, 50, 0.0).unwrap();
        back.advance(&mut psi, 50, 0.0).unwrap();
        assert!(psi.distance(&psi0).unwrap() < 1e-10 * psi0.norm());

        let g = Complex64::from_polar(1.0, 0.7);
        let mut a = psi0.clone();
        a.scale(g);
        fwd.advance(&mut a, 20, 0.0).unwrap();
        let mut b = psi0;
        fwd.advance(&mut b, 20, 0.0).unwrap();
        b.scale(g);
        assert!(a.distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn dt_psi_plane_wave() {
        let grid = Grid::periodic(2, 16, 2.0 * std::f64::consts::PI).unwrap();
        let psi = ComplexField::from_fn(grid, |x| Complex64::from_polar(1.0, 3.0 * x[0] + x[1]));
        let d = dt_psi(&psi, 2.0, false).unwrap();
        for (a, p) in d.values.iter().zip(&psi.values) {
            assert!((a - Complex64::new(0.0, -5.0) * p).norm() < 1e-11);
        }
    }

    #[test]
    fn dt_psi_matches_central_difference() {
        let grid = Grid::periodic(2, 32, 12.0).unwrap();
        let psi0 = gaussian(grid, 1.2);
        let exact = dt_psi(&psi0, 2.0, true).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let mut p = psi0.clone();
            let mut m = psi0.clone();
            Stepper::new(grid, dt, 2.0, true).unwrap().step(&mut p).unwrap();
            Stepper::new(grid, -dt, 2.0, true).unwrap().step(&mut m).unwrap();
            let fd = ComplexField::new(
                grid,
                p.values.iter().zip(&m.values).map(|(a, b)| (a - b) / (2.0 * dt)).collect(),
            )
            .unwrap();
            errs.push(fd.distance(&exact).unwrap());
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 1.8, "{errs:?}");
    }

    #[test]
    fn radial_blowup_is_reported_with_time() {
        let grid = Grid::radial(3, 20, 5.0).unwrap();
        let mut psi = ComplexField::zeros(grid);
        psi.values[3] = Complex64::new(f64::NAN, 0.0);
        let out = evolve(&psi, &SolverConfig::new(1.5, 0.1, 1.0), &mut []);
        assert!(matches!(out, Err(QhdError::BlowUp { .. })));
    }
}
