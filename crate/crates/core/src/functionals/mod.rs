//! Conserved quantities, chemical potential, higher-order functionals and
//! the time-history identities built from them.

mod diagnostics;
mod morawetz;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};
use crate::evolve::{dt_psi, nonlinearity};
use crate::fields::{ComplexField, ScalarField, Spectral, VectorField};
use crate::polar::{polar_factor, HydroFields, VacuumThreshold};

pub use diagnostics::{
    diagnose, di_dt_residual, energy_flux_residual, record_schema, three_point_derivative, CirculationEntry,
    DiagnosticsConfig, DiagnosticsObserver, DiagnosticsRecord, DiIdentity, FluxResidual,
    MorawetzMode, MorawetzNorms, Residuals,
};
pub use morawetz::{morawetz_h, morawetz_h_resampled, morawetz_rhs_norms, MORAWETZ_NODE_LIMIT};

/// Power-law pressure `p = (gamma-1)/gamma rho^gamma` with internal energy
/// `f = rho^gamma / gamma`. A disabled law is identically zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub gamma: f64,
    pub enabled: bool,
}

impl PowerLaw {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, enabled: true }
    }

    pub fn disabled(gamma: f64) -> Self {
        Self { gamma, enabled: false }
    }

    pub fn with_pressure(gamma: f64, enabled: bool) -> Self {
        Self { gamma, enabled }
    }

    /// `rho^gamma`.
    pub fn rho_gamma(&self, rho: f64) -> f64 {
        rho * nonlinearity(rho, self.gamma)
    }

    pub fn f(&self, rho: f64) -> f64 {
        if self.enabled {
            self.rho_gamma(rho) / self.gamma
        } else {
            0.0
        }
    }

    pub fn p(&self, rho: f64) -> f64 {
        if self.enabled {
            (self.gamma - 1.0) / self.gamma * self.rho_gamma(rho)
        } else {
            0.0
        }
    }

    pub fn f_prime(&self, rho: f64) -> f64 {
        if self.enabled {
            nonlinearity(rho, self.gamma)
        } else {
            0.0
        }
    }

    pub fn p_prime(&self, rho: f64) -> f64 {
        (self.gamma - 1.0) * self.f_prime(rho)
    }

    /// `d (1 - (1 + 2/d) / gamma)`, the weight of `int rho^gamma` in the
    /// pseudo-conformal balance.
    pub fn balance_coefficient(&self, d: usize) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let d = d as f64;
        d * (1.0 - (1.0 + 2.0 / d) / self.gamma)
    }
}

impl From<f64> for PowerLaw {
    fn from(gamma: f64) -> Self {
        PowerLaw::new(gamma)
    }
}

pub fn mass(h: &HydroFields) -> f64 {
    h.rho().integral()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub quantum: f64,
    pub internal: f64,
    pub total: f64,
}

impl EnergyParts {
    fn from_parts(kinetic: f64, quantum: f64, internal: f64) -> Self {
        Self {
            kinetic,
            quantum,
            internal,
            total: kinetic + quantum + internal,
        }
    }
}

/// `e = 1/2 |grad sqrt_rho|^2 + 1/2 |Lambda|^2 + f(rho)`.
pub fn energy_density(h: &HydroFields, law: impl Into<PowerLaw>) -> Result<ScalarField> {
    let law = law.into();
    let g = h.gradient_sqrt_rho()?;
    let q = g.magnitude_sq();
    let k = h.lambda.magnitude_sq();
    let values = (0..h.grid().len())
        .map(|i| {
            let a = h.sqrt_rho.values[i];
            0.5 * q.values[i] + 0.5 * k.values[i] + law.f(a * a)
        })
        .collect();
    ScalarField::new(*h.grid(), values)
}

pub fn energy(h: &HydroFields, law: impl Into<PowerLaw>) -> Result<EnergyParts> {
    let law = law.into();
    let g = h.gradient_sqrt_rho()?;
    let kinetic = 0.5 * h.lambda.norm_sq();
    let quantum = 0.5 * g.norm_sq();
    let internal = h.sqrt_rho.map(|a| law.f(a * a)).integral();
    Ok(EnergyParts::from_parts(kinetic, quantum, internal))
}

/// Energy evaluated on the wave function: `int 1/2 |grad psi|^2 + f(|psi|^2)`.
/// On radial grids the kinetic term is `-1/2 <psi, L psi>` with the
/// discrete radial Laplacian, the quantity the radial stepper conserves.
pub fn energy_wave(psi: &ComplexField, law: impl Into<PowerLaw>) -> Result<f64> {
    let law = law.into();
    let grid = psi.grid;
    let kinetic = if grid.is_periodic() {
        let g = Spectral::new(grid)?.gradient_complex(psi)?;
        0.5 * g.iter().map(|c| c.norm_sq()).sum::<f64>()
    } else {
        let lap = crate::fields::RadialOperator::new(&grid)?.apply(&psi.values);
        -0.5 * (0..grid.len())
            .map(|j| grid.radial_weight(j) * (psi.values[j].conj() * lap[j]).re)
            .sum::<f64>()
    };
    let internal = psi.density().map(|r| law.f(r)).integral();
    Ok(kinetic + internal)
}

/// `lambda = -1/2 lap sqrt_rho + 1/2 |Lambda|^2 / sqrt_rho + f'(rho) sqrt_rho`
/// on the mask, zero elsewhere.
pub fn lambda_field(
    h: &HydroFields,
    law: impl Into<PowerLaw>,
    eps: VacuumThreshold,
) -> Result<ScalarField> {
    let law = law.into();
    let lap = Spectral::new(*h.grid())?.laplacian(&h.sqrt_rho)?;
    let k = h.lambda.magnitude_sq();
    let mask = h.mask(eps);
    let values = (0..h.grid().len())
        .map(|i| {
            if !mask[i] {
                return 0.0;
            }
            let a = h.sqrt_rho.values[i];
            -0.5 * lap.values[i] + 0.5 * k.values[i] / a + law.f_prime(a * a) * a
        })
        .collect();
    ScalarField::new(*h.grid(), values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiResidual {
    pub l2: f64,
    pub mask_fraction: f64,
}

/// `|| sqrt_rho lambda - (-1/4 lap rho + e + p) ||_2` over the mask.
pub fn xi_consistency_residual(
    h: &HydroFields,
    law: impl Into<PowerLaw>,
    eps: VacuumThreshold,
) -> Result<XiResidual> {
    let law = law.into();
    let grid = *h.grid();
    let lambda = lambda_field(h, law, eps)?;
    let lap_rho = Spectral::new(grid)?.laplacian(&h.rho())?;
    let e = energy_density(h, law)?;
    let mask = h.mask(eps);
    let mut acc = 0.0;
    let mut kept = 0usize;
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        kept += 1;
        let a = h.sqrt_rho.values[i];
        let rho = a * a;
        let rhs = -0.25 * lap_rho.values[i] + e.values[i] + law.p(rho);
        let d = a * lambda.values[i] - rhs;
        acc += d * d;
    }
    Ok(XiResidual {
        l2: (acc * grid.cell_volume()).sqrt(),
        mask_fraction: kept as f64 / grid.len() as f64,
    })
}

/// `Re(conj(phi) dt_psi)` and `-Im(conj(phi) dt_psi)` on the mask: the
/// time derivative of `sqrt_rho` and the chemical potential `lambda`,
/// both taken from the equation.
pub fn wave_time_derivatives(
    psi: &ComplexField,
    law: impl Into<PowerLaw>,
    eps: VacuumThreshold,
) -> Result<(ScalarField, ScalarField)> {
    let law = law.into();
    let d = dt_psi(psi, law.gamma, law.enabled)?;
    let pf = polar_factor(psi, eps);
    let prod: Vec<Complex64> = pf
        .phi
        .values
        .iter()
        .zip(&d.values)
        .zip(&pf.mask)
        .map(|((p, dv), &m)| if m { p.conj() * dv } else { Complex64::new(0.0, 0.0) })
        .collect();
    Ok((
        ScalarField::new(psi.grid, prod.iter().map(|z| z.re).collect())?,
        ScalarField::new(psi.grid, prod.iter().map(|z| -z.im).collect())?,
    ))
}

/// `I = int lambda^2 + (dt sqrt_rho)^2`. The time derivative of `sqrt_rho`
/// must be supplied (from [`wave_time_derivatives`] or by differencing).
#[allow(non_snake_case)]
pub fn I_of_state(
    h: &HydroFields,
    law: impl Into<PowerLaw>,
    eps: VacuumThreshold,
    dt_sqrt_rho: Option<&ScalarField>,
) -> Result<f64> {
    let ds = dt_sqrt_rho.ok_or_else(|| {
        QhdError::MissingInput("I from hydrodynamic data needs the time derivative of sqrt_rho".into())
    })?;
    h.grid().check_same(&ds.grid)?;
    let lambda = lambda_field(h, law, eps)?;
    Ok(lambda.norm_sq() + ds.norm_sq())
}

/// `I = int |dt psi|^2`.
#[allow(non_snake_case)]
pub fn I_wave(psi: &ComplexField, law: impl Into<PowerLaw>) -> Result<f64> {
    let law = law.into();
    Ok(dt_psi(psi, law.gamma, law.enabled)?.norm_sq())
}

/// Result of evaluating the pseudo-conformal energy at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoConformal {
    pub t: f64,
    pub v: f64,
    /// Sum-of-squares form, only defined for `t > 0`.
    pub form2: Option<f64>,
}

/// `V = int |x|^2/2 rho - t int x . J + t^2 E`, with positions taken in the
/// fundamental domain of the box.
pub fn pseudo_conformal_v(h: &HydroFields, t: f64, law: impl Into<PowerLaw>) -> Result<PseudoConformal> {
    let law = law.into();
    let grid = *h.grid();
    grid.require_periodic()?;
    let e = energy(h, law)?;
    let g = h.gradient_sqrt_rho()?;
    let dv = grid.cell_volume();
    let mut moment = 0.0;
    let mut flux = 0.0;
    let mut form2 = 0.0;
    for i in 0..grid.len() {
        let x = grid.position(i);
        let a = h.sqrt_rho.values[i];
        let mut r2 = 0.0;
        let mut xl = 0.0;
        let mut q = 0.0;
        let mut w = 0.0;
        for ax in 0..grid.dim {
            let l = h.lambda.components[ax][i];
            r2 += x[ax] * x[ax];
            xl += x[ax] * l;
            q += g.components[ax][i].powi(2);
            if t > 0.0 {
                w += (l - x[ax] / t * a).powi(2);
            }
        }
        moment += 0.5 * r2 * a * a;
        flux += xl * a;
        form2 += 0.5 * q + 0.5 * w + law.f(a * a);
    }
    let v = dv * (moment - t * flux) + t * t * e.total;
    Ok(PseudoConformal {
        t,
        v,
        form2: (t > 0.0).then(|| t * t * dv * form2),
    })
}

/// Trapezoid accumulation of the pseudo-conformal balance
/// `V(t) + c int_0^t s int rho^gamma ds = V(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceTracker {
    coefficient: f64,
    v0: Option<f64>,
    last: Option<(f64, f64)>,
    integral: f64,
}

impl BalanceTracker {
    pub fn new(law: PowerLaw, dim: usize) -> Self {
        Self {
            coefficient: law.balance_coefficient(dim),
            v0: None,
            last: None,
            integral: 0.0,
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// Adds a sample and returns the balance defect relative to `|V(0)|`.
    pub fn push(&mut self, t: f64, v: f64, rho_gamma: f64) -> f64 {
        let s = t * rho_gamma;
        if let Some((t0, s0)) = self.last {
            self.integral += 0.5 * (t - t0) * (s + s0);
        }
        self.last = Some((t, s));
        let v0 = *self.v0.get_or_insert(v);
        (v + self.coefficient * self.integral - v0) / v0.abs().max(f64::MIN_POSITIVE)
    }
}

/// `int |x|^2 rho` with positions in the fundamental domain. Logs a warning
/// when density is not negligible near the box boundary.
pub fn variance(h: &HydroFields) -> f64 {
    let grid = *h.grid();
    let half = 0.5 * grid.length;
    let dv = grid.cell_volume();
    let mut total = 0.0;
    let mut edge = 0.0;
    let mut mass = 0.0;
    for i in 0..grid.len() {
        let x = grid.position(i);
        let rho = h.sqrt_rho.values[i].powi(2);
        let r2: f64 = x[..grid.dim].iter().map(|c| c * c).sum();
        total += r2 * rho;
        mass += rho;
        if x[..grid.dim].iter().any(|c| c.abs() >= 0.9 * half) {
            edge += rho;
        }
    }
    if mass > 0.0 && edge > 1e-10 * mass {
        log::warn!("variance: {:.2e} of the mass lies near the box boundary", edge / mass);
    }
    total * dv
}

/// Divergence of `Lambda lambda - dt_sqrt_rho grad sqrt_rho`.
pub(crate) fn energy_flux_divergence(
    h: &HydroFields,
    lambda: &ScalarField,
    dt_sqrt_rho: &ScalarField,
) -> Result<ScalarField> {
    let grid = *h.grid();
    let g = h.gradient_sqrt_rho()?;
    let comps = (0..grid.dim)
        .map(|a| {
            (0..grid.len())
                .map(|i| {
                    h.lambda.components[a][i] * lambda.values[i]
                        - dt_sqrt_rho.values[i] * g.components[a][i]
                })
                .collect()
        })
        .collect();
    Spectral::new(grid)?.divergence(&VectorField::new(grid, comps)?)
}
