//! End-to-end: hydrodynamic data on disk, lifted, evolved into a run
//! directory, then read back the way the plotting scripts do.

use std::fs;

use qhd_core::evolve::SolverConfig;
use qhd_core::fields::{read_complex, Grid};
use qhd_core::functionals::{DiagnosticsConfig, MorawetzMode, PowerLaw};
use qhd_core::polar::{madelung, read_hydro, write_hydro, HydroData, VacuumThreshold};
use qhd_core::runner::{
    decay_fit_file, gaussian_hydro, lift_data, read_records, run_to_dir, Manifest, RunRequest, SnapshotPolicy,
    DIAGNOSTICS, SCHEMA,
};

#[test]
fn lift_evolve_diagnose() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Grid::periodic(2, 64, 24.0).unwrap();
    let h = gaussian_hydro(&grid, 1.0, 1.5, [0.0; 3], 0.2, 0.4, [1, 0, 0]).unwrap();
    let stored = tmp.path().join("h.qhdf");
    write_hydro(&stored, &HydroData::Periodic(h.clone())).unwrap();

    let psi0 = lift_data(&read_hydro(&stored).unwrap(), &[], 10_000).unwrap();
    let solver = SolverConfig::new(2.0, 0.01, 12.0).with_stride(50);
    let out = tmp.path().join("run");
    let summary = run_to_dir(RunRequest {
        name: "pipeline",
        psi0: &psi0,
        solver,
        diagnostics: DiagnosticsConfig::new(PowerLaw::new(2.0)).with_morawetz(MorawetzMode::Resampled(16)),
        snapshots: SnapshotPolicy::Every,
        out_dir: &out,
        force: false,
        config: None,
    })
    .unwrap();

    // The stream on disk is exactly what the run returned.
    let records = read_records(out.join(DIAGNOSTICS)).unwrap();
    assert_eq!(records, summary.records);
    assert_eq!(records.len(), 25);
    let m0 = records[0].mass;
    assert!(records.iter().all(|r| (r.mass - m0).abs() < 1e-10 * m0));
    // The flux needs both neighbours, so only the end records lack it.
    let n = records.len();
    assert!(records[1..n - 1].iter().all(|r| r.residuals.energy_flux.is_some()));
    assert!(records[n - 1].residuals.energy_flux.is_none());

    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(SCHEMA)).unwrap()).unwrap();
    assert_eq!(schema["run"]["name"], "pipeline");

    // Snapshots round-trip bit for bit and carry the recorded state.
    let manifest = Manifest::read(&out).unwrap();
    assert_eq!(manifest.outputs.snapshots.len(), records.len());
    let last = manifest.outputs.snapshots.last().unwrap();
    let psi = read_complex(out.join(&last.path)).unwrap();
    assert_eq!(psi, summary.trajectory.final_state);
    assert_eq!(last.t, 12.0);
    let hh = madelung(&psi, VacuumThreshold::default()).unwrap();
    assert!((hh.sqrt_rho.norm_sq() - m0).abs() < 1e-10 * m0);

    let fit = decay_fit_file(out.join(DIAGNOSTICS), "rho_gamma", Some((2.0, 12.0))).unwrap();
    assert!(fit.exponent < 0.0 && fit.sigma_theory == Some(1.0));
}
