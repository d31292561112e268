use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qhd_core::fields::{read_complex, Grid};
use qhd_core::polar::{read_hydro, write_hydro, HydroData};
use qhd_core::runner::{gaussian_hydro, Manifest, DIAGNOSTICS, MANIFEST};

fn qhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhd")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn gaussian_config(dir: &Path, out: &Path, extra: &str) -> std::path::PathBuf {
    let cfg = dir.join("g.cfg");
    fs::write(
        &cfg,
        format!(
            "# small gaussian\nname = g\nrecipe = gaussian\ndim = 2\nn = 32\nlength = 16\ngamma = 2\n\
             dt = 0.01\nt_end = 0.05\noutput_dir = {}\namplitude = 1\nwidth = 1.5\n{extra}",
            out.display()
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn empty_config_is_a_usage_error_listing_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.cfg");
    fs::write(&cfg, "# nothing here\n").unwrap();
    let out = qhd(&["scenario", "run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    for key in ["name", "recipe", "gamma", "dt", "t_end", "output_dir"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn bad_value_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), &tmp.path().join("o"), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("width = 1.5", "width = -1");
    fs::write(&cfg, text).unwrap();
    let out = qhd(&["scenario", "run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 12"), "{}", stderr(&out));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn scenario_run_then_rerun_then_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let cfg = gaussian_config(tmp.path(), &out_dir, "snapshot_stride = 2\n");
    let cfg = cfg.to_str().unwrap();

    let first = qhd(&["scenario", "run", cfg]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let manifest = Manifest::read(&out_dir).unwrap();
    assert!(out_dir.join(MANIFEST).is_file());
    assert!(out_dir.join(DIAGNOSTICS).is_file());
    assert!(!manifest.outputs.snapshots.is_empty());
    for f in manifest.files() {
        assert!(out_dir.join(&f).is_file(), "{f}");
    }
    let ndjson = fs::read_to_string(out_dir.join(DIAGNOSTICS)).unwrap();
    assert_eq!(ndjson.lines().count(), manifest.outputs.snapshots.len());

    let again = qhd(&["scenario", "run", cfg]);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));

    let forced = qhd(&["scenario", "run", cfg, "--force"]);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
    assert_eq!(fs::read_to_string(out_dir.join(DIAGNOSTICS)).unwrap(), ndjson);
}

#[test]
fn lift_diagnose_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let g = Grid::periodic(2, 64, 24.0).unwrap();
    let h = gaussian_hydro(&g, 1.0, 2.0, [0.0; 3], 0.1, 0.4, [1, 0, 0]).unwrap();
    let h_path = tmp.path().join("h.qhdf");
    write_hydro(&h_path, &HydroData::Periodic(h.clone())).unwrap();
    let psi_path = tmp.path().join("psi.qhdf");
    let out = qhd(&["lift", "--input", h_path.to_str().unwrap(), "--output", psi_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read_complex(&psi_path).unwrap().grid, g);

    let back = tmp.path().join("back.qhdf");
    let out = qhd(&[
        "diagnose",
        "--input",
        psi_path.to_str().unwrap(),
        "--gamma",
        "2",
        "--hydro-output",
        back.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(record["mass"].as_f64().unwrap() > 0.0);
    assert!(record.get("I_value").is_some() && record.get("H_value").is_some());
    let HydroData::Periodic(hb) = read_hydro(&back).unwrap() else { panic!() };
    let (ds, dl) = hb.distance(&h).unwrap();
    assert!(ds < 1e-10 * h.sqrt_rho.norm() && dl < 1e-8 * h.lambda.norm(), "{ds} {dl}");
}

#[test]
fn lift_rejects_unbalanced_vortices() {
    let tmp = tempfile::tempdir().unwrap();
    let g = Grid::periodic(2, 32, 16.0).unwrap();
    let h = gaussian_hydro(&g, 1.0, 2.0, [0.0; 3], 0.1, 0.0, [0; 3]).unwrap();
    let h_path = tmp.path().join("h.qhdf");
    write_hydro(&h_path, &HydroData::Periodic(h)).unwrap();
    let v = tmp.path().join("v.json");
    fs::write(&v, r#"[{"x": [0, 0], "k": 1}]"#).unwrap();
    let out = qhd(&[
        "lift",
        "--input",
        h_path.to_str().unwrap(),
        "--vortices",
        v.to_str().unwrap(),
        "--output",
        tmp.path().join("psi.qhdf").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("winding"), "{}", stderr(&out));
}

#[test]
fn evolve_and_decay_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), &tmp.path().join("seed"), "");
    assert_eq!(code(&qhd(&["scenario", "run", cfg.to_str().unwrap()])), 0);
    let psi = tmp.path().join("seed").join("initial.qhdf");
    let run = tmp.path().join("free");
    let out = qhd(&[
        "evolve",
        "--input",
        psi.to_str().unwrap(),
        "--gamma",
        "2",
        "--dt",
        "0.05",
        "--t-end",
        "4",
        "--stride",
        "4",
        "--morawetz",
        "off",
        "--snapshots",
        "final",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let diag = run.join(DIAGNOSTICS);
    let out = qhd(&["decay-fit", "--diag", diag.to_str().unwrap(), "--quantity", "rho_gamma", "--window", "1,4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(fit["exponent"].as_f64().unwrap().is_finite());
    assert_eq!(fit["samples"].as_u64(), Some(16));
    assert!(fit["sigma_theory"].as_f64().is_some());

    let out = qhd(&["decay-fit", "--diag", diag.to_str().unwrap(), "--quantity", "nonsense"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn stability_report_to_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = gaussian_config(tmp.path(), &tmp.path().join("unused"), "background = 0.3\nchirp = 0.2\n");
    let report = tmp.path().join("report.json");
    let args = [
        "stability",
        "--config",
        cfg.to_str().unwrap(),
        "--ladder",
        "10,100",
        "--output",
        report.to_str().unwrap(),
    ];
    let out = qhd(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["reference"], "datum");
    assert_eq!(r["sub_box_half_side"].as_f64().unwrap(), 4.0);
    assert_eq!(r["members"].as_array().unwrap().len(), 2);
    assert_eq!(code(&qhd(&args)), 2);

    let out = qhd(&["stability", "--config", cfg.to_str().unwrap(), "--ladder", "100,10"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_qhd"))
        .args(["decay-fit", "--diag", "missing.ndjson", "--quantity", "mass"])
        .env("QHD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_qhd"))
        .args(["decay-fit", "--diag", "missing.ndjson", "--quantity", "mass"])
        .env("QHD_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}
