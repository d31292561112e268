//! Configuration, scenario orchestration and persistence.

mod config;
mod output;
mod recipes;
mod stability;

use std::fs;
use std::path::Path;

pub use config::{ConfigMap, Recipe, Scenario, SnapshotPolicy};
pub use output::{
    read_records, run_to_dir, Manifest, Outputs, RunRequest, RunSummary, SnapshotEntry, DIAGNOSTICS, INITIAL,
    MANIFEST, SCHEMA, SNAPSHOT_DIR,
};
pub use recipes::{gaussian_hydro, initial_state, lattice_vortices, lift_data, periodic_set, vortex_hydro, Initial};
pub use stability::{
    build_sequence, delta_norm, stability_experiment, DistanceRow, LadderMember, StabilityReport,
};

use crate::error::{QhdError, Result};
use crate::estimates::{decay_fit, default_window, sigma_exponent, DecayFit};
use crate::functionals::{DiagnosticsConfig, PowerLaw};
use crate::lifting::Vortex;
use crate::polar::{madelung, HydroData};

/// Diagnostics settings implied by a scenario and its initial state.
pub fn diagnostics_for(s: &Scenario, init: &Initial) -> DiagnosticsConfig {
    let law = PowerLaw {
        gamma: s.solver.gamma,
        enabled: s.solver.pressure_enabled,
    };
    let mut cfg = DiagnosticsConfig::new(law).with_morawetz(s.morawetz);
    cfg.kappa = s.solver.kappa_mode;
    if s.track_vortices {
        cfg = cfg.tracking(init.vortices.clone(), s.circulation_radius.unwrap_or(init.loop_radius));
    }
    cfg
}

/// Parses, builds and runs the scenario in `path`, writing into its output directory.
pub fn run_scenario(path: impl AsRef<Path>, force: bool) -> Result<RunSummary> {
    let text = fs::read_to_string(path.as_ref())?;
    let scenario = Scenario::parse(&text)?;
    run_parsed(&scenario, force)
}

pub fn run_parsed(s: &Scenario, force: bool) -> Result<RunSummary> {
    // Refuse before any compute if the directory is taken.
    if !force && s.output_dir.is_dir() && fs::read_dir(&s.output_dir)?.next().is_some() {
        return Err(QhdError::OutputExists(s.output_dir.display().to_string()));
    }
    let init = initial_state(s)?;
    let diagnostics = diagnostics_for(s, &init);
    run_to_dir(RunRequest {
        name: &s.name,
        psi0: &init.psi,
        solver: s.solver,
        diagnostics,
        snapshots: s.snapshots,
        out_dir: &s.output_dir,
        force,
        config: Some((s.config.hash(), s.config.as_json())),
    })
}

/// Reads `[{"x": [a, b], "k": n}, ...]`.
pub fn read_vortices(path: impl AsRef<Path>) -> Result<Vec<Vortex>> {
    let text = fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| QhdError::Format(format!("{}: {e}", path.as_ref().display())))
}

/// Run parameters stored next to a diagnostics stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunInfo {
    pub dim: usize,
    pub gamma: f64,
    pub pressure: bool,
}

/// Reads the `run` block of the schema written beside `diag`, if present.
pub fn run_info(diag: impl AsRef<Path>) -> Option<RunInfo> {
    let schema = diag.as_ref().with_file_name(SCHEMA);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(schema).ok()?).ok()?;
    let run = v.get("run")?;
    Some(RunInfo {
        dim: run.get("dim")?.as_u64()? as usize,
        gamma: run.get("gamma")?.as_f64()?,
        pressure: run.get("pressure")?.as_bool()?,
    })
}

/// Log-log decay fit of one numeric record field over `window`
/// (default window from the last record time). The theoretical exponent is
/// attached when the run parameters are known and pressure was on.
pub fn decay_fit_file(diag: impl AsRef<Path>, quantity: &str, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let records = read_records(diag.as_ref())?;
    let last = records.last().ok_or_else(|| QhdError::MissingInput("no records".into()))?;
    if last.quantity(quantity).is_none() && records.iter().all(|r| r.quantity(quantity).is_none()) {
        return Err(QhdError::MissingInput(format!("records have no numeric field `{quantity}`")));
    }
    let series: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.quantity(quantity).map(|v| (r.t, v)))
        .collect();
    let window = window.unwrap_or_else(|| default_window(last.t));
    let mut fit = decay_fit(quantity, &series, window)?;
    if let Some(info) = run_info(diag.as_ref()) {
        if info.pressure {
            fit.sigma_theory = sigma_exponent(info.dim, info.gamma).ok();
        }
    }
    Ok(fit)
}

/// Madelung transform of a stored wave function, as storable hydrodynamic data.
pub fn hydro_of(psi: &crate::fields::ComplexField) -> Result<HydroData> {
    let eps = crate::polar::VacuumThreshold::default();
    if psi.grid.is_radial() {
        Ok(HydroData::Radial(crate::polar::madelung_radial(psi, eps)?))
    } else {
        Ok(HydroData::Periodic(madelung(psi, eps)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(dir: &Path) -> String {
        format!(
            "name = g\nrecipe = gaussian\ndim = 2\nn = 32\nlength = 12\ngamma = 2\ndt = 0.01\n\
             t_end = 0.03\noutput_dir = {}\namplitude = 1\nwidth = 1\n",
            dir.display()
        )
    }

    #[test]
    fn scenario_run_writes_manifest_and_refuses_rerun() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let cfg = tmp.path().join("g.cfg");
        fs::write(&cfg, minimal(&out)).unwrap();
        let run = run_scenario(&cfg, false).unwrap();
        assert_eq!(run.manifest.config_hash.as_deref().map(str::len), Some(64));
        assert!(out.join(MANIFEST).is_file() && out.join(DIAGNOSTICS).is_file());
        assert!(!run.manifest.outputs.snapshots.is_empty());
        let err = run_scenario(&cfg, false).err().unwrap();
        assert!(err.is_usage());
        run_scenario(&cfg, true).unwrap();
        let info = run_info(out.join(DIAGNOSTICS)).unwrap();
        assert_eq!(info, RunInfo { dim: 2, gamma: 2.0, pressure: true });
    }

    #[test]
    fn identical_configs_give_identical_streams() {
        let tmp = tempfile::tempdir().unwrap();
        let text = |o: &Path| {
            format!(
                "name = l\nrecipe = vortex-lattice\nn = 32\nlength = 24\ngamma = 2\ndt = 0.01\nt_end = 0.02\n\
                 output_dir = {}\nrows = 2\ncols = 2\ncore = 1\njitter = 0.2\nseed = 11\n",
                o.display()
            )
        };
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        run_parsed(&Scenario::parse(&text(&a)).unwrap(), false).unwrap();
        run_parsed(&Scenario::parse(&text(&b)).unwrap(), false).unwrap();
        let da = fs::read(a.join(DIAGNOSTICS)).unwrap();
        assert_eq!(da, fs::read(b.join(DIAGNOSTICS)).unwrap());
        assert!(!da.is_empty());
    }

    #[test]
    fn vortices_file_format() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("v.json");
        fs::write(&p, r#"[{"x": [1.5, -2], "k": 1}, {"x": [0, 0], "k": -1}]"#).unwrap();
        let v = read_vortices(&p).unwrap();
        assert_eq!(v[0], Vortex { x: [1.5, -2.0], k: 1 });
        fs::write(&p, "[{\"x\": 1}]").unwrap();
        assert!(matches!(read_vortices(&p), Err(QhdError::Format(_))));
    }
}
