//! Polar factorization and the structural identities of hydrodynamic states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};
use crate::fields::{
    radial_derivative, read_snapshot, write_snapshot, ComplexField, Grid, ScalarField, Snapshot,
    Spectral, VectorField,
};

/// Amplitude below which a node counts as vacuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VacuumThreshold {
    /// Fraction of the largest amplitude in the field.
    Relative(f64),
    Absolute(f64),
}

impl Default for VacuumThreshold {
    fn default() -> Self {
        VacuumThreshold::Relative(1e-8)
    }
}

impl VacuumThreshold {
    pub fn resolve(&self, max_amplitude: f64) -> f64 {
        match *self {
            VacuumThreshold::Relative(f) => f * max_amplitude,
            VacuumThreshold::Absolute(a) => a,
        }
    }
}

fn masked(amplitude: f64, eps: f64) -> bool {
    amplitude > 0.0 && amplitude >= eps
}

/// Hydrodynamic state `(sqrt_rho, Lambda)` on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HydroFields {
    pub sqrt_rho: ScalarField,
    pub lambda: VectorField,
    /// `grad sqrt_rho` when it was obtained from a wave function.
    pub grad_sqrt_rho: Option<VectorField>,
}

impl HydroFields {
    pub fn new(sqrt_rho: ScalarField, lambda: VectorField) -> Result<Self> {
        sqrt_rho.grid.check_same(&lambda.grid)?;
        if let Some(v) = sqrt_rho.values.iter().find(|v| !(**v >= 0.0)) {
            return Err(QhdError::Domain(format!("sqrt_rho must be >= 0, found {v}")));
        }
        Ok(Self {
            sqrt_rho,
            lambda,
            grad_sqrt_rho: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.sqrt_rho.grid
    }

    pub fn rho(&self) -> ScalarField {
        self.sqrt_rho.map(|a| a * a)
    }

    /// Current `J = sqrt_rho * Lambda`.
    pub fn current(&self) -> VectorField {
        self.lambda
            .scaled_by(&self.sqrt_rho)
            .expect("fields share a grid")
    }

    pub fn threshold(&self, eps: VacuumThreshold) -> f64 {
        eps.resolve(self.sqrt_rho.max_abs())
    }

    pub fn mask(&self, eps: VacuumThreshold) -> Vec<bool> {
        let e = self.threshold(eps);
        self.sqrt_rho.values.iter().map(|&a| masked(a, e)).collect()
    }

    /// Velocity `Lambda / sqrt_rho` on the mask, zero in vacuum.
    pub fn velocity(&self, eps: VacuumThreshold) -> VectorField {
        let mask = self.mask(eps);
        let mut v = self.lambda.clone();
        for c in &mut v.components {
            for (i, x) in c.iter_mut().enumerate() {
                *x = if mask[i] { *x / self.sqrt_rho.values[i] } else { 0.0 };
            }
        }
        v
    }

    /// Zeroes `Lambda` on vacuum nodes.
    pub fn enforce_vacuum(&mut self, eps: VacuumThreshold) {
        let mask = self.mask(eps);
        for c in &mut self.lambda.components {
            for (x, &m) in c.iter_mut().zip(&mask) {
                if !m {
                    *x = 0.0;
                }
            }
        }
    }

    /// `grad sqrt_rho`, cached from the wave function or computed spectrally.
    pub fn gradient_sqrt_rho(&self) -> Result<VectorField> {
        match &self.grad_sqrt_rho {
            Some(g) => Ok(g.clone()),
            None => Spectral::new(*self.grid())?.gradient(&self.sqrt_rho),
        }
    }

    /// Componentwise difference norms `(||d sqrt_rho||, ||d Lambda||)`.
    pub fn distance(&self, other: &HydroFields) -> Result<(f64, f64)> {
        self.grid().check_same(other.grid())?;
        let ds = self
            .sqrt_rho
            .zip_map(&other.sqrt_rho, |a, b| a - b)?
            .norm();
        let mut dl = 0.0;
        for (a, b) in self.lambda.components.iter().zip(&other.lambda.components) {
            dl += a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        Ok((ds, (dl * self.grid().cell_volume()).sqrt()))
    }
}

/// Canonical polar factor with its vacuum mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarFactor {
    pub phi: ComplexField,
    pub mask: Vec<bool>,
}

pub fn polar_factor(psi: &ComplexField, eps: VacuumThreshold) -> PolarFactor {
    let e = eps.resolve(psi.max_modulus());
    let mut mask = Vec::with_capacity(psi.values.len());
    let values = psi
        .values
        .iter()
        .map(|z| {
            let a = z.norm();
            let m = masked(a, e);
            mask.push(m);
            if m {
                z / a
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    PolarFactor {
        phi: ComplexField {
            grid: psi.grid,
            values,
        },
        mask,
    }
}

/// Polar factorization on a periodic grid.
pub fn madelung(psi: &ComplexField, eps: VacuumThreshold) -> Result<HydroFields> {
    let sp = Spectral::new(psi.grid)?;
    let pf = polar_factor(psi, eps);
    let grad = sp.gradient_complex(psi)?;
    let len = psi.values.len();
    let mut lambda = Vec::with_capacity(grad.len());
    let mut gsr = Vec::with_capacity(grad.len());
    for g in &grad {
        let mut l = vec![0.0; len];
        let mut s = vec![0.0; len];
        for i in 0..len {
            if pf.mask[i] {
                let w = pf.phi.values[i].conj() * g.values[i];
                l[i] = w.im;
                s[i] = w.re;
            }
        }
        lambda.push(l);
        gsr.push(s);
    }
    Ok(HydroFields {
        sqrt_rho: psi.modulus(),
        lambda: VectorField::new(psi.grid, lambda)?,
        grad_sqrt_rho: Some(VectorField::new(psi.grid, gsr)?),
    })
}

/// Spherically symmetric state: `sqrt_rho(r)` and the radial component of
/// `Lambda` on a radial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialHydro {
    pub sqrt_rho: ScalarField,
    pub lambda: Vec<f64>,
}

impl RadialHydro {
    pub fn new(sqrt_rho: ScalarField, lambda: Vec<f64>) -> Result<Self> {
        sqrt_rho.grid.require_radial()?;
        if lambda.len() != sqrt_rho.values.len() {
            return Err(QhdError::GridMismatch(format!(
                "{} Lambda values for {} radial nodes",
                lambda.len(),
                sqrt_rho.values.len()
            )));
        }
        if sqrt_rho.values.iter().any(|v| !(*v >= 0.0)) || lambda.iter().any(|v| !v.is_finite()) {
            return Err(QhdError::Domain("radial data must be finite with sqrt_rho >= 0".into()));
        }
        Ok(Self { sqrt_rho, lambda })
    }

    pub fn grid(&self) -> &Grid {
        &self.sqrt_rho.grid
    }

    /// Weighted distances `(||d sqrt_rho||, ||d Lambda||)` in `L^2(r^{d-1} dr)`.
    pub fn distance(&self, other: &RadialHydro) -> Result<(f64, f64)> {
        self.grid().check_same(other.grid())?;
        let g = self.grid();
        let (mut ds, mut dl) = (0.0, 0.0);
        for j in 0..g.n {
            let w = g.radial_weight(j);
            ds += w * (self.sqrt_rho.values[j] - other.sqrt_rho.values[j]).powi(2);
            dl += w * (self.lambda[j] - other.lambda[j]).powi(2);
        }
        Ok((ds.sqrt(), dl.sqrt()))
    }

    pub fn norm(&self) -> (f64, f64) {
        let g = self.grid();
        let (mut s, mut l) = (0.0, 0.0);
        for j in 0..g.n {
            let w = g.radial_weight(j);
            s += w * self.sqrt_rho.values[j].powi(2);
            l += w * self.lambda[j].powi(2);
        }
        (s.sqrt(), l.sqrt())
    }
}

/// Polar factorization of a radial wave function.
pub fn madelung_radial(psi: &ComplexField, eps: VacuumThreshold) -> Result<RadialHydro> {
    psi.grid.require_radial()?;
    let pf = polar_factor(psi, eps);
    let d = radial_derivative(&psi.grid, &psi.values);
    let lambda = (0..psi.values.len())
        .map(|j| {
            if pf.mask[j] {
                (pf.phi.values[j].conj() * d[j]).im
            } else {
                0.0
            }
        })
        .collect();
    RadialHydro::new(psi.modulus(), lambda)
}

/// Max-norm defect of `Re(grad psi^* (x) grad psi) = grad sqrt_rho (x) grad sqrt_rho + Lambda (x) Lambda`
/// over masked nodes.
pub fn quadratic_identity_residual(psi: &ComplexField, eps: VacuumThreshold) -> Result<f64> {
    let sp = Spectral::new(psi.grid)?;
    let grad = sp.gradient_complex(psi)?;
    let h = madelung(psi, eps)?;
    let mask = polar_factor(psi, eps).mask;
    let gs = h.grad_sqrt_rho.as_ref().expect("set by madelung");
    let dim = grad.len();
    let mut worst: f64 = 0.0;
    for i in (0..psi.values.len()).filter(|&i| mask[i]) {
        for a in 0..dim {
            for b in a..dim {
                let lhs = (grad[a].values[i].conj() * grad[b].values[i]).re;
                let rhs = gs.components[a][i] * gs.components[b][i]
                    + h.lambda.components[a][i] * h.lambda.components[b][i];
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Curl defect `curl J - 2 grad sqrt_rho ^ Lambda`.
#[derive(Clone, Debug)]
pub enum CurlResidual {
    Planar(ScalarField),
    Spatial(VectorField),
}

impl CurlResidual {
    pub fn l2(&self) -> f64 {
        match self {
            CurlResidual::Planar(f) => f.norm(),
            CurlResidual::Spatial(v) => v.norm(),
        }
    }
}

pub fn irrotationality_residual(h: &HydroFields) -> Result<CurlResidual> {
    let grid = *h.grid();
    grid.require_periodic()?;
    let sp = Spectral::new(grid)?;
    let j = h.current();
    let g = h.gradient_sqrt_rho()?;
    let l = &h.lambda;
    match grid.dim {
        2 => {
            let curl = sp.curl2d(&j)?;
            let values = (0..grid.len())
                .map(|i| {
                    let wedge = g.components[0][i] * l.components[1][i]
                        - g.components[1][i] * l.components[0][i];
                    curl.values[i] - 2.0 * wedge
                })
                .collect();
            Ok(CurlResidual::Planar(ScalarField::new(grid, values)?))
        }
        3 => {
            let curl = sp.curl3d(&j)?;
            let mut out = curl.components.clone();
            for i in 0..grid.len() {
                let gv = [g.components[0][i], g.components[1][i], g.components[2][i]];
                let lv = [l.components[0][i], l.components[1][i], l.components[2][i]];
                let cross = [
                    gv[1] * lv[2] - gv[2] * lv[1],
                    gv[2] * lv[0] - gv[0] * lv[2],
                    gv[0] * lv[1] - gv[1] * lv[0],
                ];
                for a in 0..3 {
                    out[a][i] -= 2.0 * cross[a];
                }
            }
            Ok(CurlResidual::Spatial(VectorField::new(grid, out)?))
        }
        _ => Err(QhdError::UnsupportedGrid(
            "irrotationality needs dim 2 or 3".into(),
        )),
    }
}

/// Max-norm defect of `1/2 rho grad(lap sqrt_rho / sqrt_rho) = 1/4 grad lap rho - div(grad sqrt_rho (x) grad sqrt_rho)`.
pub fn bohm_identity_residual(rho: &ScalarField, eps: VacuumThreshold) -> Result<f64> {
    let grid = rho.grid;
    let sp = Spectral::new(grid)?;
    let sqrt_rho = rho.map(|r| r.max(0.0).sqrt());
    let e = eps.resolve(sqrt_rho.max_abs());
    let floor = e * e;
    let below = rho.values.iter().filter(|&&r| !(r >= floor && r > 0.0)).count();
    if below > 0 {
        return Err(QhdError::VacuumUnsupported { floor, count: below });
    }
    let lap = sp.laplacian(&sqrt_rho)?;
    let quantum = lap.zip_map(&sqrt_rho, |l, a| l / a)?;
    let gq = sp.gradient(&quantum)?;
    let glr = sp.gradient(&sp.laplacian(rho)?)?;
    let gs = sp.gradient(&sqrt_rho)?;
    let dim = grid.dim;
    let mut worst: f64 = 0.0;
    // div of the tensor, one row at a time.
    let mut div_rows = Vec::with_capacity(dim);
    for a in 0..dim {
        let row = VectorField::new(
            grid,
            (0..dim)
                .map(|b| {
                    gs.components[a]
                        .iter()
                        .zip(&gs.components[b])
                        .map(|(x, y)| x * y)
                        .collect()
                })
                .collect(),
        )?;
        div_rows.push(sp.divergence(&row)?);
    }
    for a in 0..dim {
        for i in 0..grid.len() {
            let lhs = 0.5 * rho.values[i] * gq.components[a][i];
            let rhs = 0.25 * glr.components[a][i] - div_rows[a].values[i];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Hydrodynamic data of either grid kind, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum HydroData {
    Periodic(HydroFields),
    Radial(RadialHydro),
}

/// Writes `(sqrt_rho, Lambda_1, .., Lambda_d)` as a multi-component snapshot
/// (two components on radial grids).
pub fn write_hydro(path: impl AsRef<std::path::Path>, h: &HydroData) -> Result<()> {
    let snap = match h {
        HydroData::Periodic(h) => {
            let mut components = vec![h.sqrt_rho.values.clone()];
            components.extend(h.lambda.components.iter().cloned());
            Snapshot::Stack { grid: *h.grid(), components }
        }
        HydroData::Radial(h) => Snapshot::Stack {
            grid: *h.grid(),
            components: vec![h.sqrt_rho.values.clone(), h.lambda.clone()],
        },
    };
    write_snapshot(path, &snap)
}

pub fn read_hydro(path: impl AsRef<std::path::Path>) -> Result<HydroData> {
    match read_snapshot(path)? {
        Snapshot::Stack { grid, mut components } => {
            if grid.is_radial() && components.len() == 2 {
                let lambda = components.pop().unwrap_or_default();
                let s = ScalarField::new(grid, components.pop().unwrap_or_default())?;
                return Ok(HydroData::Radial(RadialHydro::new(s, lambda)?));
            }
            if grid.is_periodic() && components.len() == grid.dim + 1 {
                let s = ScalarField::new(grid, components.remove(0))?;
                let l = VectorField::new(grid, components)?;
                return Ok(HydroData::Periodic(HydroFields::new(s, l)?));
            }
            Err(QhdError::Format(format!(
                "{} components do not form hydrodynamic data on this grid",
                components.len()
            )))
        }
        _ => Err(QhdError::Format(
            "expected a hydrodynamic snapshot (sqrt_rho followed by Lambda components)".into(),
        )),
    }
}
