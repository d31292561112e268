//! Decay exponents, circulation quantization and rarefaction distance.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{QhdError, Result};
use crate::fields::{ComplexField, Grid, ScalarField, Spectral};
use crate::polar::{HydroFields, VacuumThreshold};

/// Admissible pressure exponents: `gamma > 1`, and `gamma < 3` in three dimensions.
pub fn check_gamma(d: usize, gamma: f64) -> Result<()> {
    let ok = gamma > 1.0 && gamma.is_finite() && (d != 3 || gamma < 3.0);
    if ok {
        Ok(())
    } else {
        Err(QhdError::Range {
            what: "gamma",
            detail: format!("{gamma} inadmissible for d = {d}"),
        })
    }
}

/// Decay rate `min(1, d (gamma - 1) / 2)`.
pub fn sigma_exponent(d: usize, gamma: f64) -> Result<f64> {
    if !(2..=3).contains(&d) {
        return Err(QhdError::Range {
            what: "dimension",
            detail: format!("{d} not in {{2, 3}}"),
        });
    }
    check_gamma(d, gamma)?;
    Ok((0.5 * d as f64 * (gamma - 1.0)).min(1.0))
}

/// Log-log least-squares fit of a time series over a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub quantity: String,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    pub exponent: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval of the exponent.
    pub ci95: f64,
    /// Root-mean-square residual of the fit in log space.
    pub rms_residual: f64,
    pub sigma_theory: Option<f64>,
}

/// Default window `[max(5, t_end / 10), 0.8 t_end]`.
pub fn default_window(t_end: f64) -> (f64, f64) {
    ((t_end / 10.0).max(5.0), 0.8 * t_end)
}

pub fn decay_fit(quantity: &str, series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t0 >= 1.0) || !(t1 > t0) {
        return Err(QhdError::Range {
            what: "fit window",
            detail: format!("[{t0}, {t1}] must satisfy 1 <= t0 < t1"),
        });
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= t0 - 1e-12 && *t <= t1 + 1e-12)
        .copied()
        .collect();
    if pts.len() < 10 {
        return Err(QhdError::Range {
            what: "fit window",
            detail: format!("{} samples in [{t0}, {t1}], need at least 10", pts.len()),
        });
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(QhdError::Domain(format!(
            "{quantity} must be positive for a log fit; got {v} at t = {t}"
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = n - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let t_crit = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| QhdError::Domain(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(DecayFit {
        quantity: quantity.to_string(),
        t0,
        t1,
        samples: pts.len(),
        exponent: slope,
        intercept,
        ci95: t_crit * se,
        rms_residual: (ssr / n).sqrt(),
        sigma_theory: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Bilinear,
    /// Band-limited (Fourier) interpolation; spectrally accurate.
    Trigonometric,
}

/// Result of a loop integral of the velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circulation {
    pub raw: f64,
    pub winding: i64,
    /// `|raw / 2 pi - winding|`.
    pub defect: f64,
}

struct Bilinear<'a> {
    grid: Grid,
    values: &'a [f64],
}

impl Bilinear<'_> {
    fn corners(grid: &Grid, p: [f64; 2]) -> ([usize; 4], [f64; 4]) {
        let h = grid.spacing();
        let fx = (p[0] + 0.5 * grid.length) / h;
        let fy = (p[1] + 0.5 * grid.length) / h;
        let (ix, iy) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - ix, fy - iy);
        let n = grid.n as i64;
        let wrap = |i: f64| (i as i64).rem_euclid(n) as usize;
        let (i0, j0, i1, j1) = (wrap(ix), wrap(iy), wrap(ix + 1.0), wrap(iy + 1.0));
        (
            [
                grid.ravel([i0, j0, 0]),
                grid.ravel([i1, j0, 0]),
                grid.ravel([i0, j1, 0]),
                grid.ravel([i1, j1, 0]),
            ],
            [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
        )
    }

    fn eval(&self, p: [f64; 2]) -> f64 {
        let (idx, w) = Self::corners(&self.grid, p);
        idx.iter().zip(&w).map(|(&i, &w)| w * self.values[i]).sum()
    }
}

/// Evaluates a periodic planar field at arbitrary points from its spectrum.
pub struct TrigInterpolant {
    grid: Grid,
    spectrum: Vec<Complex64>,
    k: Vec<f64>,
}

impl TrigInterpolant {
    pub fn new(f: &ScalarField) -> Result<Self> {
        f.grid.require_dim(2)?;
        let sp = Spectral::new(f.grid)?;
        let n = f.grid.n;
        let k = (0..n).map(|j| sp.wavevector(j)[1]).collect();
        Ok(Self {
            grid: f.grid,
            spectrum: sp.forward_real(&f.values),
            k,
        })
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let n = self.grid.n;
        let x0 = -0.5 * self.grid.length;
        let ex: Vec<Complex64> = self
            .k
            .iter()
            .map(|k| Complex64::from_polar(1.0, k * (p[0] - x0)))
            .collect();
        let ey: Vec<Complex64> = self
            .k
            .iter()
            .map(|k| Complex64::from_polar(1.0, k * (p[1] - x0)))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            let row: Complex64 = (0..n).map(|b| self.spectrum[a * n + b] * ey[b]).sum();
            acc += row * ex[a];
        }
        acc.re / (n * n) as f64
    }
}

/// Circulation of `v = Lambda / sqrt_rho` around a circle, with the interpolation
/// and segment count chosen by the caller.
pub fn circulation_with(
    h: &HydroFields,
    center: [f64; 2],
    radius: f64,
    eps: VacuumThreshold,
    interp: Interpolation,
    segments: usize,
) -> Result<Circulation> {
    let grid = *h.grid();
    grid.require_dim(2)?;
    if !(radius > 0.0) || segments < 64 {
        return Err(QhdError::Range {
            what: "circulation loop",
            detail: format!("radius {radius} must be positive with at least 64 segments"),
        });
    }
    let floor = h.threshold(eps);
    let points: Vec<[f64; 2]> = (0..segments)
        .map(|s| {
            let a = 2.0 * PI * s as f64 / segments as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect();
    for p in &points {
        let (idx, _) = Bilinear::corners(&grid, *p);
        if idx.iter().any(|&i| !(h.sqrt_rho.values[i] >= floor && h.sqrt_rho.values[i] > 0.0)) {
            return Err(QhdError::LoopThroughVacuum {
                cx: center[0],
                cy: center[1],
                radius,
            });
        }
    }
    let sample: Box<dyn Fn([f64; 2]) -> [f64; 3]> = match interp {
        Interpolation::Bilinear => {
            let s = Bilinear { grid, values: &h.sqrt_rho.values };
            let lx = Bilinear { grid, values: &h.lambda.components[0] };
            let ly = Bilinear { grid, values: &h.lambda.components[1] };
            Box::new(move |p| [s.eval(p), lx.eval(p), ly.eval(p)])
        }
        Interpolation::Trigonometric => {
            let s = TrigInterpolant::new(&h.sqrt_rho)?;
            let lx = TrigInterpolant::new(&h.lambda.component(0))?;
            let ly = TrigInterpolant::new(&h.lambda.component(1))?;
            Box::new(move |p| [s.eval(p), lx.eval(p), ly.eval(p)])
        }
    };
    // Periodic trapezoid rule: sum of v . tangent times arc element.
    let dl = 2.0 * PI * radius / segments as f64;
    let mut raw = 0.0;
    for (s, p) in points.iter().enumerate() {
        let a = 2.0 * PI * s as f64 / segments as f64;
        let [amp, lx, ly] = sample(*p);
        if !(amp > 0.0) {
            return Err(QhdError::LoopThroughVacuum {
                cx: center[0],
                cy: center[1],
                radius,
            });
        }
        raw += (-lx * a.sin() + ly * a.cos()) / amp * dl;
    }
    let w = raw / (2.0 * PI);
    let winding = w.round() as i64;
    Ok(Circulation {
        raw,
        winding,
        defect: (w - winding as f64).abs(),
    })
}

/// Circulation on a loop of at least 64 segments, refined to about four
/// samples per grid spacing.
pub fn circulation(
    h: &HydroFields,
    center: [f64; 2],
    radius: f64,
    eps: VacuumThreshold,
    interp: Interpolation,
) -> Result<Circulation> {
    let per_cell = (2.0 * PI * radius / h.grid().spacing() * 4.0).ceil() as usize;
    circulation_with(h, center, radius, eps, interp, per_cell.max(64))
}

/// Circulation computed from the wave function itself: `psi` and `grad psi`
/// are interpolated spectrally and `v = Im(conj(psi) grad psi) / |psi|^2`.
/// Spectrally accurate for smooth `psi`, including near vortex cores.
pub fn wave_circulation(
    psi: &ComplexField,
    center: [f64; 2],
    radius: f64,
    segments: usize,
) -> Result<Circulation> {
    let grid = psi.grid;
    grid.require_dim(2)?;
    let sp = Spectral::new(grid)?;
    let grad = sp.gradient_complex(psi)?;
    let part = |f: &ComplexField, re: bool| {
        TrigInterpolant::new(&if re { f.real() } else { f.imag() })
    };
    let fields = [
        part(psi, true)?,
        part(psi, false)?,
        part(&grad[0], true)?,
        part(&grad[0], false)?,
        part(&grad[1], true)?,
        part(&grad[1], false)?,
    ];
    let dl = 2.0 * PI * radius / segments as f64;
    let mut raw = 0.0;
    for s in 0..segments {
        let a = 2.0 * PI * s as f64 / segments as f64;
        let p = [center[0] + radius * a.cos(), center[1] + radius * a.sin()];
        let v: Vec<f64> = fields.iter().map(|f| f.eval(p)).collect();
        let z = Complex64::new(v[0], v[1]);
        let gx = Complex64::new(v[2], v[3]);
        let gy = Complex64::new(v[4], v[5]);
        let den = z.norm_sqr();
        if !(den > 0.0) {
            return Err(QhdError::LoopThroughVacuum {
                cx: center[0],
                cy: center[1],
                radius,
            });
        }
        let vx = (z.conj() * gx).im / den;
        let vy = (z.conj() * gy).im / den;
        raw += (-vx * a.sin() + vy * a.cos()) * dl;
    }
    let w = raw / (2.0 * PI);
    let winding = w.round() as i64;
    Ok(Circulation {
        raw,
        winding,
        defect: (w - winding as f64).abs(),
    })
}

/// Density minimum near `guess`, refined by a quadratic fit through the
/// neighbouring nodes.
pub fn locate_vortex(h: &HydroFields, guess: [f64; 2], search_radius: f64) -> Result<[f64; 2]> {
    let grid = *h.grid();
    grid.require_dim(2)?;
    let rho = h.rho();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..grid.len() {
        let x = grid.position(i);
        let d = grid
            .wrap_delta(x[0] - guess[0])
            .hypot(grid.wrap_delta(x[1] - guess[1]));
        if d <= search_radius && best.is_none_or(|(_, r)| rho.values[i] < r) {
            best = Some((i, rho.values[i]));
        }
    }
    let (i, _) = best.ok_or_else(|| QhdError::Domain("no node inside the search disk".into()))?;
    let x = grid.position(i);
    let h_ = grid.spacing();
    let mut out = [x[0], x[1]];
    for (axis, slot) in out.iter_mut().enumerate() {
        let fm = rho.values[grid.shift(i, axis, -1)];
        let f0 = rho.values[i];
        let fp = rho.values[grid.shift(i, axis, 1)];
        let curv = fp - 2.0 * f0 + fm;
        if curv > 0.0 {
            *slot += 0.5 * h_ * (fm - fp) / curv;
        }
    }
    let half = 0.5 * grid.length;
    for c in &mut out {
        *c = (*c + half).rem_euclid(grid.length) - half;
    }
    Ok(out)
}

/// `|| Lambda - (x / t) sqrt_rho ||_2`.
pub fn kinetic_profile_distance(h: &HydroFields, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(QhdError::Range {
            what: "time",
            detail: format!("rarefaction distance needs t > 0, got {t}"),
        });
    }
    let grid = *h.grid();
    grid.require_periodic()?;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let x = grid.position(i);
        for a in 0..grid.dim {
            let d = h.lambda.components[a][i] - x[a] / t * h.sqrt_rho.values[i];
            acc += d * d;
        }
    }
    Ok((acc * grid.cell_volume()).sqrt())
}

/// Largest slope of `log I` between consecutive samples.
pub fn max_log_growth_rate(series: &[(f64, f64)]) -> f64 {
    series
        .windows(2)
        .map(|w| ((w[1].1.ln() - w[0].1.ln()) / (w[1].0 - w[0].0)).max(0.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::VectorField;
    use crate::polar::madelung;

    #[test]
    fn sigma_values() {
        assert_eq!(sigma_exponent(2, 2.0).unwrap(), 1.0);
        assert!((sigma_exponent(3, 4.0 / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(sigma_exponent(2, 3.0).unwrap(), 1.0);
        assert!(sigma_exponent(3, 3.5).is_err());
        assert!(sigma_exponent(2, 1.0).is_err());
        assert!(sigma_exponent(4, 2.0).is_err());
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| {
            let t = 1.0 + i as f64;
            (t, 3.0 / t)
        }).collect();
        let fit = decay_fit("x", &series, (1.0, 50.0)).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-10);
        assert!(fit.ci95 < 1e-10);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn fit_preconditions() {
        let series: Vec<(f64, f64)> = (0..20).map(|i| (1.0 + i as f64, 1.0)).collect();
        assert!(decay_fit("x", &series, (0.5, 10.0)).is_err());
        assert!(decay_fit("x", &series, (1.0, 5.0)).is_err());
        let mut bad = series.clone();
        bad[3].1 = 0.0;
        assert!(matches!(decay_fit("x", &bad, (1.0, 20.0)), Err(QhdError::Domain(_))));
    }

    fn vortex_wave(n: usize, l: f64) -> ComplexField {
        let grid = Grid::periodic(2, n, l).unwrap();
        ComplexField::from_fn(grid, |x| {
            Complex64::new(x[0], x[1]) * (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp()
        })
    }

    fn vortex_state(n: usize, l: f64) -> HydroFields {
        madelung(&vortex_wave(n, l), VacuumThreshold::default()).unwrap()
    }

    #[test]
    fn wave_circulation_is_spectral() {
        let psi = vortex_wave(64, 16.0);
        let c = wave_circulation(&psi, [0.0, 0.0], 1.0, 64).unwrap();
        assert_eq!(c.winding, 1);
        assert!(c.defect < 1e-10, "{}", c.defect);
        let pair = wave_circulation(&psi, [0.3, 0.1], 2.0, 128).unwrap();
        assert_eq!(pair.winding, 1);
    }

    #[test]
    fn canonical_vortex_winds_once() {
        let h = vortex_state(128, 10.0);
        let eps = VacuumThreshold::default();
        for r in [0.5, 1.0, 1.5] {
            let c = circulation(&h, [0.0, 0.0], r, eps, Interpolation::Bilinear).unwrap();
            assert_eq!(c.winding, 1);
        }
        let c = circulation(&h, [0.0, 0.0], 1.0, eps, Interpolation::Bilinear).unwrap();
        assert!(c.defect < 1e-3, "{}", c.defect);
        let t = circulation(&h, [0.0, 0.0], 1.0, eps, Interpolation::Trigonometric).unwrap();
        assert!(t.defect < 1e-5, "{}", t.defect);
        let off = circulation(&h, [3.0, 3.0], 1.0, eps, Interpolation::Bilinear).unwrap();
        assert_eq!(off.winding, 0);
    }

    #[test]
    fn loop_through_vacuum_is_rejected() {
        let grid = Grid::periodic(2, 32, 8.0).unwrap();
        let h = HydroFields::new(
            ScalarField::from_fn(grid, |x| if x[0].abs() < 0.3 { 0.0 } else { 1.0 }),
            VectorField::zeros(grid),
        )
        .unwrap();
        assert!(matches!(
            circulation(&h, [0.0, 0.0], 1.0, VacuumThreshold::default(), Interpolation::Bilinear),
            Err(QhdError::LoopThroughVacuum { .. })
        ));
    }

    #[test]
    fn vortex_is_located_off_grid() {
        let grid = Grid::periodic(2, 64, 16.0).unwrap();
        let c = [0.37, -0.21];
        let psi = ComplexField::from_fn(grid, |x| {
            Complex64::new(x[0] - c[0], x[1] - c[1]) * (-(x[0] * x[0] + x[1] * x[1]) / 8.0).exp()
        });
        let h = madelung(&psi, VacuumThreshold::default()).unwrap();
        let p = locate_vortex(&h, [0.0, 0.0], 1.0).unwrap();
        assert!((p[0] - c[0]).abs() < 0.05 && (p[1] - c[1]).abs() < 0.05, "{p:?}");
    }

    #[test]
    fn rarefaction_distance_cases() {
        let grid = Grid::periodic(2, 64, 20.0).unwrap();
        let t = 2.0;
        let sr = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let exact = VectorField::from_fn(grid, |x| {
            let a = (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
            [x[0] / t * a, x[1] / t * a, 0.0]
        });
        let h = HydroFields::new(sr.clone(), exact).unwrap();
        assert!(kinetic_profile_distance(&h, t).unwrap() < 1e-14);
        let still = HydroFields::new(sr.clone(), VectorField::zeros(grid)).unwrap();
        let var: f64 = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                (x[0] * x[0] + x[1] * x[1]) * sr.values[i].powi(2)
            })
            .sum::<f64>()
            * grid.cell_volume();
        assert!((kinetic_profile_distance(&still, t).unwrap() - var.sqrt() / t).abs() < 1e-12);
        assert!(kinetic_profile_distance(&still, 0.0).is_err());
    }
}
