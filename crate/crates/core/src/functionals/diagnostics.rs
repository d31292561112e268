use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{QhdError, Result};
use crate::estimates::{kinetic_profile_distance, locate_vortex, wave_circulation};
use crate::evolve::{KappaMode, Observer, Trajectory};
use crate::fields::{ComplexField, ScalarField};
use crate::lifting::Vortex;
use crate::polar::{irrotationality_residual, madelung, madelung_radial, HydroFields, VacuumThreshold};

use super::morawetz::{morawetz_h, morawetz_h_resampled, morawetz_rhs_norms, MORAWETZ_NODE_LIMIT};
use super::{
    energy, energy_density, energy_flux_divergence, energy_wave, mass, pseudo_conformal_v,
    variance, wave_time_derivatives, xi_consistency_residual, BalanceTracker, I_of_state, I_wave,
    PowerLaw,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MorawetzNorms {
    pub pressure_norm: f64,
    pub capillary_norm: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub irrotationality: f64,
    pub xi_consistency: f64,
    /// Needs the neighbouring snapshots; absent at the ends of a run.
    pub energy_flux: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirculationEntry {
    /// Tracked vortex position at this time.
    pub x: [f64; 2],
    /// Initial winding of the tracked vortex.
    pub k: i32,
    pub winding: i64,
    pub defect: f64,
    /// False when the loop could not be evaluated (it crossed vacuum).
    pub ok: bool,
}

/// One line of the diagnostics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub quantum: f64,
    pub internal: f64,
    #[serde(rename = "I_value")]
    pub i_value: f64,
    #[serde(rename = "I_wave_value")]
    pub i_wave_value: f64,
    #[serde(rename = "V_value")]
    pub v_value: f64,
    #[serde(rename = "V_form2_value")]
    pub v_form2_value: Option<f64>,
    #[serde(rename = "H_value")]
    pub h_value: Option<f64>,
    pub morawetz_norms: MorawetzNorms,
    pub circulation: Vec<CirculationEntry>,
    pub residuals: Residuals,
    pub variance: f64,
    /// `||grad sqrt_rho||_2`.
    pub grad_sqrt_rho: f64,
    /// `int rho^gamma`.
    pub rho_gamma: f64,
    /// `||Lambda - (x/t) sqrt_rho||_2^2`, absent at `t = 0`.
    pub rarefaction_sq: Option<f64>,
}

impl DiagnosticsRecord {
    /// Numeric value of a top-level scalar field by its serialized name.
    pub fn quantity(&self, name: &str) -> Option<f64> {
        let v = serde_json::to_value(self).ok()?;
        v.get(name)?.as_f64()
    }
}

/// Units and meaning of every record field, written next to each diagnostics stream.
pub fn record_schema() -> serde_json::Value {
    let f = |ty: &str, units: &str, desc: &str| json!({ "type": ty, "units": units, "description": desc });
    json!({
        "format": "ndjson",
        "units_convention": "hbar = m = 1; L = length, T = time; energies per unit mass",
        "fields": {
            "t": f("number", "T", "time"),
            "mass": f("number", "L^0 (norm^2)", "int rho"),
            "energy": f("number", "L^-2 * mass", "kinetic + quantum + internal"),
            "kinetic": f("number", "L^-2 * mass", "1/2 int |Lambda|^2"),
            "quantum": f("number", "L^-2 * mass", "1/2 int |grad sqrt_rho|^2"),
            "internal": f("number", "L^-2 * mass", "int f(rho), f = rho^gamma / gamma"),
            "I_value": f("number", "T^-2 * mass", "int lambda^2 + (d_t sqrt_rho)^2 from hydrodynamic fields"),
            "I_wave_value": f("number", "T^-2 * mass", "int |d_t psi|^2"),
            "V_value": f("number", "L^2 * mass", "int |x|^2/2 rho - t int x.J + t^2 E"),
            "V_form2_value": f("number|null", "L^2 * mass", "sum-of-squares form of V, null at t = 0"),
            "H_value": f("number|null", "L * mass^2 / T", "interaction Morawetz functional, null when not computed"),
            "morawetz_norms": {
                "type": "object",
                "fields": {
                    "pressure_norm": f("number", "mixed", "|| |grad|^{(1-d)/2} sqrt(rho p(rho)) ||^2"),
                    "capillary_norm": f("number", "mixed", "|| |grad|^{(3-d)/2} sqrt(rho K(rho)) ||^2"),
                }
            },
            "circulation": {
                "type": "array",
                "items": {
                    "x": f("[number, number]", "L", "tracked vortex position"),
                    "k": f("integer", "1", "initial winding"),
                    "winding": f("integer", "1", "measured winding, nearest integer of circulation / 2 pi"),
                    "defect": f("number", "1", "|circulation / 2 pi - winding|"),
                    "ok": f("boolean", "1", "false if the loop crossed vacuum"),
                }
            },
            "residuals": {
                "type": "object",
                "fields": {
                    "irrotationality": f("number", "L^2 norm", "|| curl J - 2 grad sqrt_rho ^ Lambda ||_2"),
                    "xi_consistency": f("number", "L^2 norm", "|| sqrt_rho lambda - (-lap rho / 4 + e + p) ||_2 on the mask"),
                    "energy_flux": f("number|null", "L^2 norm", "|| d_t e + div(Lambda lambda - d_t sqrt_rho grad sqrt_rho) ||_2, null at run ends"),
                }
            },
            "variance": f("number", "L^2 * mass", "int |x|^2 rho"),
            "grad_sqrt_rho": f("number", "L^-1 * mass^(1/2)", "|| grad sqrt_rho ||_2"),
            "rho_gamma": f("number", "mass^gamma * L^(d(1-gamma))", "int rho^gamma"),
            "rarefaction_sq": f("number|null", "L^-2 * mass", "|| Lambda - (x/t) sqrt_rho ||_2^2, null at t = 0"),
        }
    })
}

/// How the interaction Morawetz functional is evaluated per record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorawetzMode {
    Off,
    /// Direct sum on small grids, skipped otherwise.
    #[default]
    Auto,
    Direct,
    /// Direct sum on `m^d` resampled points.
    Resampled(usize),
}

impl std::str::FromStr for MorawetzMode {
    type Err = String;

    /// `off`, `auto`, `direct` or `resampled:<m>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "off" => Ok(Self::Off),
            "auto" => Ok(Self::Auto),
            "direct" => Ok(Self::Direct),
            other => other
                .strip_prefix("resampled:")
                .and_then(|m| m.trim().parse::<usize>().ok())
                .map(Self::Resampled)
                .ok_or_else(|| format!("expected auto, off, direct or resampled:<m>, found `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsConfig {
    pub law: PowerLaw,
    pub eps: VacuumThreshold,
    pub kappa: KappaMode,
    pub morawetz: MorawetzMode,
    /// Vortices to follow; positions are updated from density minima.
    pub vortices: Vec<Vortex>,
    pub circulation_radius: f64,
}

impl DiagnosticsConfig {
    pub fn new(law: PowerLaw) -> Self {
        Self {
            law,
            eps: VacuumThreshold::default(),
            kappa: KappaMode::Qhd,
            morawetz: MorawetzMode::Auto,
            vortices: Vec::new(),
            circulation_radius: 1.0,
        }
    }

    pub fn tracking(mut self, vortices: Vec<Vortex>, radius: f64) -> Self {
        self.vortices = vortices;
        self.circulation_radius = radius;
        self
    }

    pub fn with_morawetz(mut self, mode: MorawetzMode) -> Self {
        self.morawetz = mode;
        self
    }
}

fn morawetz_value(h: &HydroFields, mode: MorawetzMode) -> Result<Option<f64>> {
    match mode {
        MorawetzMode::Off => Ok(None),
        MorawetzMode::Auto if h.grid().len() > MORAWETZ_NODE_LIMIT => Ok(None),
        MorawetzMode::Auto | MorawetzMode::Direct => morawetz_h(h).map(Some),
        MorawetzMode::Resampled(m) => morawetz_h_resampled(h, m).map(Some),
    }
}

fn track(psi: &ComplexField, h: &HydroFields, cfg: &DiagnosticsConfig, positions: &mut [Vortex]) -> Vec<CirculationEntry> {
    let r = cfg.circulation_radius;
    let segments = (2.0 * std::f64::consts::PI * r / psi.grid.spacing() * 4.0).ceil().max(64.0) as usize;
    positions
        .iter_mut()
        .map(|v| {
            if let Ok(x) = locate_vortex(h, v.x, 0.5 * r) {
                v.x = x;
            }
            match wave_circulation(psi, v.x, r, segments) {
                Ok(c) => CirculationEntry {
                    x: v.x,
                    k: v.k,
                    winding: c.winding,
                    defect: c.defect,
                    ok: true,
                },
                Err(e) => {
                    log::warn!("circulation around {:?} failed: {e}", v.x);
                    CirculationEntry {
                        x: v.x,
                        k: v.k,
                        winding: 0,
                        defect: 0.5,
                        ok: false,
                    }
                }
            }
        })
        .collect()
}

fn radial_record(psi: &ComplexField, t: f64, cfg: &DiagnosticsConfig) -> Result<DiagnosticsRecord> {
    let grid = psi.grid;
    let law = cfg.law;
    let hr = madelung_radial(psi, cfg.eps)?;
    let rho = psi.density();
    let total = energy_wave(psi, law)?;
    let internal = rho.map(|r| law.f(r)).integral();
    let kinetic = 0.5 * (0..grid.len()).map(|j| grid.radial_weight(j) * hr.lambda[j].powi(2)).sum::<f64>();
    let quantum = total - internal - kinetic;
    let iw = I_wave(psi, law)?;
    let r2 = ScalarField::from_fn(grid, |r| r[0] * r[0]);
    let var = r2.zip_map(&rho, |a, b| a * b)?.integral();
    let xj: f64 = (0..grid.len())
        .map(|j| grid.radial_weight(j) * grid.radius(j) * hr.sqrt_rho.values[j] * hr.lambda[j])
        .sum();
    Ok(DiagnosticsRecord {
        t,
        mass: rho.integral(),
        energy: kinetic + quantum + internal,
        kinetic,
        quantum,
        internal,
        i_value: iw,
        i_wave_value: iw,
        v_value: 0.5 * var - t * xj + t * t * total,
        v_form2_value: None,
        h_value: None,
        morawetz_norms: MorawetzNorms::default(),
        circulation: Vec::new(),
        residuals: Residuals::default(),
        variance: var,
        grad_sqrt_rho: (2.0 * quantum.max(0.0)).sqrt(),
        rho_gamma: rho.map(|r| law.rho_gamma(r)).integral(),
        rarefaction_sq: None,
    })
}

/// Diagnostics of one state. `positions` holds the tracked vortices and is
/// updated in place.
pub fn diagnose(
    psi: &ComplexField,
    t: f64,
    cfg: &DiagnosticsConfig,
    positions: &mut [Vortex],
) -> Result<DiagnosticsRecord> {
    if psi.grid.is_radial() {
        return radial_record(psi, t, cfg);
    }
    let law = cfg.law;
    let h = madelung(psi, cfg.eps)?;
    let e = energy(&h, law)?;
    let (ds, _) = wave_time_derivatives(psi, law, cfg.eps)?;
    let pc = pseudo_conformal_v(&h, t, law)?;
    let irrot = irrotationality_residual(&h)?.l2();
    let xi = xi_consistency_residual(&h, law, cfg.eps)?.l2;
    let rarefaction = if t > 0.0 {
        Some(kinetic_profile_distance(&h, t)?.powi(2))
    } else {
        None
    };
    Ok(DiagnosticsRecord {
        t,
        mass: mass(&h),
        energy: e.total,
        kinetic: e.kinetic,
        quantum: e.quantum,
        internal: e.internal,
        i_value: I_of_state(&h, law, cfg.eps, Some(&ds))?,
        i_wave_value: I_wave(psi, law)?,
        v_value: pc.v,
        v_form2_value: pc.form2,
        h_value: morawetz_value(&h, cfg.morawetz)?,
        morawetz_norms: morawetz_rhs_norms(&h, law, cfg.kappa)?,
        circulation: track(psi, &h, cfg, positions),
        residuals: Residuals {
            irrotationality: irrot,
            xi_consistency: xi,
            energy_flux: None,
        },
        variance: variance(&h),
        grad_sqrt_rho: (2.0 * e.quantum).sqrt(),
        rho_gamma: h.sqrt_rho.map(|a| law.rho_gamma(a * a)).integral(),
        rarefaction_sq: rarefaction,
    })
}

/// Second-order derivative at the middle of three possibly unequal steps.
pub fn three_point_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let hm = t[1] - t[0];
    let hp = t[2] - t[1];
    (hm * hm * f[2] - hp * hp * f[0] + (hp * hp - hm * hm) * f[1]) / (hm * hp * (hm + hp))
}

/// Both sides of `dI/dt = 4 int lambda dt_sqrt_rho p'(rho)` at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiIdentity {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxResidual {
    pub t: f64,
    /// `L^2` norm of the local conservation defect over the mask.
    pub l2: f64,
    /// `|int div F| / int |div F|`: vanishes up to round-off for a spectral divergence.
    pub divergence_integral: f64,
}

/// Per-snapshot data kept for the time-differenced identities.
#[derive(Clone, Debug)]
struct Frame {
    t: f64,
    psi: ComplexField,
    i_wave: f64,
    e: ScalarField,
}

impl Frame {
    fn new(t: f64, psi: &ComplexField, law: PowerLaw, eps: VacuumThreshold) -> Result<Self> {
        let h = madelung(psi, eps)?;
        Ok(Self {
            t,
            psi: psi.clone(),
            i_wave: I_wave(psi, law)?,
            e: energy_density(&h, law)?,
        })
    }
}

fn di_identity(frames: [&Frame; 3], law: PowerLaw, eps: VacuumThreshold) -> Result<DiIdentity> {
    let ts = [frames[0].t, frames[1].t, frames[2].t];
    let lhs = three_point_derivative(ts, [frames[0].i_wave, frames[1].i_wave, frames[2].i_wave]);
    let mid = &frames[1].psi;
    let (ds, lam) = wave_time_derivatives(mid, law, eps)?;
    let rho = mid.density();
    let integrand = ScalarField::new(
        mid.grid,
        (0..mid.grid.len())
            .map(|i| lam.values[i] * ds.values[i] * law.p_prime(rho.values[i]))
            .collect(),
    )?;
    let rhs = 4.0 * integrand.integral();
    Ok(DiIdentity {
        t: ts[1],
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

fn flux_residual(frames: [&Frame; 3], law: PowerLaw, eps: VacuumThreshold) -> Result<FluxResidual> {
    let ts = [frames[0].t, frames[1].t, frames[2].t];
    let mid = &frames[1].psi;
    let grid = mid.grid;
    let h = madelung(mid, eps)?;
    let (ds, lam) = wave_time_derivatives(mid, law, eps)?;
    let div = energy_flux_divergence(&h, &lam, &ds)?;
    let mask = h.mask(eps);
    let mut acc = 0.0;
    for i in 0..grid.len() {
        if !mask[i] {
            continue;
        }
        let de = three_point_derivative(ts, [frames[0].e.values[i], frames[1].e.values[i], frames[2].e.values[i]]);
        let r = de + div.values[i];
        acc += r * r;
    }
    let total: f64 = div.values.iter().sum();
    let scale: f64 = div.values.iter().map(|v| v.abs()).sum();
    Ok(FluxResidual {
        t: ts[1],
        l2: (acc * grid.cell_volume()).sqrt(),
        divergence_integral: if scale > 0.0 { total.abs() / scale } else { 0.0 },
    })
}

fn frames_of(traj: &Trajectory, law: PowerLaw, eps: VacuumThreshold) -> Result<Vec<Frame>> {
    if traj.snapshots.len() != traj.times.len() {
        return Err(QhdError::MissingInput(
            "trajectory was run without keeping snapshots".into(),
        ));
    }
    traj.times
        .iter()
        .zip(&traj.snapshots)
        .map(|(t, psi)| Frame::new(*t, psi, law, eps))
        .collect()
}

/// `|dI/dt - 4 int lambda dt_sqrt_rho p'(rho)|` at every interior snapshot,
/// with `dI/dt` from second-order differences of `I = int |dt psi|^2`.
pub fn di_dt_residual(traj: &Trajectory, law: PowerLaw, eps: VacuumThreshold) -> Result<Vec<DiIdentity>> {
    let frames = frames_of(traj, law, eps)?;
    frames
        .windows(3)
        .map(|w| di_identity([&w[0], &w[1], &w[2]], law, eps))
        .collect()
}

/// Local energy conservation defect at every interior snapshot.
pub fn energy_flux_residual(
    traj: &Trajectory,
    law: PowerLaw,
    eps: VacuumThreshold,
) -> Result<Vec<FluxResidual>> {
    let frames = frames_of(traj, law, eps)?;
    frames
        .windows(3)
        .map(|w| flux_residual([&w[0], &w[1], &w[2]], law, eps))
        .collect()
}

/// Observer producing one [`DiagnosticsRecord`] per observation, plus the
/// time-differenced identities and the pseudo-conformal balance.
///
/// Records are written to the optional NDJSON sink one observation late,
/// once the energy-flux residual (which needs the next snapshot) is known.
pub struct DiagnosticsObserver {
    cfg: DiagnosticsConfig,
    positions: Vec<Vortex>,
    records: Vec<DiagnosticsRecord>,
    history: VecDeque<Frame>,
    balance: BalanceTracker,
    balance_series: Vec<(f64, f64)>,
    identities: Vec<DiIdentity>,
    fluxes: Vec<FluxResidual>,
    sink: Option<Box<dyn Write>>,
    written: usize,
}

impl DiagnosticsObserver {
    pub fn new(cfg: DiagnosticsConfig, dim: usize) -> Self {
        let balance = BalanceTracker::new(cfg.law, dim);
        Self {
            positions: cfg.vortices.clone(),
            cfg,
            records: Vec::new(),
            history: VecDeque::new(),
            balance,
            balance_series: Vec::new(),
            identities: Vec::new(),
            fluxes: Vec::new(),
            sink: None,
            written: 0,
        }
    }

    pub fn with_sink(mut self, sink: Box<dyn Write>) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    /// `(t, relative balance defect)` per record.
    pub fn balance(&self) -> &[(f64, f64)] {
        &self.balance_series
    }

    pub fn di_identity(&self) -> &[DiIdentity] {
        &self.identities
    }

    pub fn flux(&self) -> &[FluxResidual] {
        &self.fluxes
    }

    fn flush_upto(&mut self, upto: usize) -> Result<()> {
        if let Some(sink) = self.sink.as_mut() {
            while self.written < upto {
                serde_json::to_writer(&mut *sink, &self.records[self.written])?;
                sink.write_all(b"\n")?;
                self.written += 1;
            }
            sink.flush()?;
        }
        Ok(())
    }

    /// Writes the remaining records and returns them.
    pub fn finish(mut self) -> Result<Vec<DiagnosticsRecord>> {
        let n = self.records.len();
        self.flush_upto(n)?;
        Ok(self.records)
    }
}

impl Observer for DiagnosticsObserver {
    fn observe(&mut self, t: f64, psi: &ComplexField) -> Result<()> {
        let rec = diagnose(psi, t, &self.cfg, &mut self.positions)?;
        let defect = self.balance.push(t, rec.v_value, rec.rho_gamma);
        self.balance_series.push((t, defect));
        self.records.push(rec);
        if psi.grid.is_periodic() {
            self.history.push_back(Frame::new(t, psi, self.cfg.law, self.cfg.eps)?);
            if self.history.len() > 3 {
                self.history.pop_front();
            }
            if self.history.len() == 3 {
                let f = [&self.history[0], &self.history[1], &self.history[2]];
                let flux = flux_residual(f, self.cfg.law, self.cfg.eps)?;
                let di = di_identity(f, self.cfg.law, self.cfg.eps)?;
                let n = self.records.len();
                self.records[n - 2].residuals.energy_flux = Some(flux.l2);
                self.fluxes.push(flux);
                self.identities.push(di);
            }
        }
        let ready = self.records.len().saturating_sub(1);
        self.flush_upto(ready)
    }
}
