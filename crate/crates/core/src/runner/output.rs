//! Run directories: diagnostics stream, snapshots and the manifest.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.json        every other file, config hash, grid, solver, run stats
//! initial.qhdf         the lifted initial state
//! diag.ndjson          one diagnostics record per observation
//! diag.schema.json     units and meaning of the record fields, plus run parameters
//! snapshots/psi_NNNNN.qhdf
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SnapshotPolicy;
use crate::error::{QhdError, Result};
use crate::evolve::{evolve, Observer, SolverConfig, Trajectory};
use crate::fields::{write_complex, ComplexField, Grid};
use crate::functionals::{record_schema, DiagnosticsConfig, DiagnosticsObserver, DiagnosticsRecord};

pub const MANIFEST: &str = "manifest.json";
pub const DIAGNOSTICS: &str = "diag.ndjson";
pub const SCHEMA: &str = "diag.schema.json";
pub const INITIAL: &str = "initial.qhdf";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub initial: String,
    pub diagnostics: String,
    pub schema: String,
    pub snapshots: Vec<SnapshotEntry>,
}

/// Contents of `manifest.json`. Paths are relative to the run directory.
/// Wall-clock timings are logged but kept out of the manifest so that
/// identical configurations give identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config_hash: Option<String>,
    pub config: Option<serde_json::Value>,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub steps: usize,
    pub dt_used: f64,
    pub final_time: f64,
    pub cfl_exceeded: bool,
    pub boundary_warnings: usize,
    pub outputs: Outputs,
}

impl Manifest {
    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(dir.as_ref().join(MANIFEST))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// Every file the run wrote, manifest included.
    pub fn files(&self) -> Vec<String> {
        let mut out = vec![
            MANIFEST.to_string(),
            self.outputs.initial.clone(),
            self.outputs.diagnostics.clone(),
            self.outputs.schema.clone(),
        ];
        out.extend(self.outputs.snapshots.iter().map(|s| s.path.clone()));
        out
    }
}

/// What to run and where to put it.
pub struct RunRequest<'a> {
    pub name: &'a str,
    pub psi0: &'a ComplexField,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
    pub snapshots: SnapshotPolicy,
    pub out_dir: &'a Path,
    pub force: bool,
    /// Canonical config text hash and key-value dump, when run from a file.
    pub config: Option<(String, serde_json::Value)>,
}

pub struct RunSummary {
    pub manifest: Manifest,
    pub records: Vec<DiagnosticsRecord>,
    pub trajectory: Trajectory,
}

/// Removes everything written so far unless the run is committed.
struct Guard {
    root: PathBuf,
    created_root: bool,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Guard {
    fn file(&mut self, rel: &str) -> PathBuf {
        let p = self.root.join(rel);
        self.files.push(p.clone());
        p
    }
}

impl Drop for Guard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

fn prepare(dir: &Path, force: bool) -> Result<Guard> {
    let taken = || QhdError::OutputExists(dir.display().to_string());
    let mut created_root = false;
    if dir.exists() {
        if !dir.is_dir() {
            return Err(taken());
        }
        let occupied = fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(taken());
        }
        if force {
            if let Ok(old) = Manifest::read(dir) {
                for f in old.files() {
                    let _ = fs::remove_file(dir.join(f));
                }
            }
            for f in [MANIFEST, DIAGNOSTICS, SCHEMA, INITIAL] {
                let _ = fs::remove_file(dir.join(f));
            }
            let snaps = dir.join(SNAPSHOT_DIR);
            if snaps.is_dir() {
                for entry in fs::read_dir(&snaps)? {
                    let p = entry?.path();
                    if p.extension().is_some_and(|e| e == "qhdf") {
                        fs::remove_file(p)?;
                    }
                }
                let _ = fs::remove_dir(&snaps);
            }
        }
    } else {
        fs::create_dir_all(dir)?;
        created_root = true;
    }
    Ok(Guard {
        root: dir.to_path_buf(),
        created_root,
        files: Vec::new(),
        dirs: Vec::new(),
        committed: false,
    })
}

fn snapshot_name(index: usize) -> String {
    format!("{SNAPSHOT_DIR}/psi_{index:05}.qhdf")
}

/// Evolves `req.psi0`, streaming diagnostics and snapshots into `req.out_dir`.
pub fn run_to_dir(req: RunRequest<'_>) -> Result<RunSummary> {
    let mut guard = prepare(req.out_dir, req.force)?;
    let grid = req.psi0.grid;
    let mut solver = req.solver;
    solver.keep_snapshots = false;
    solver.validate(&grid)?;

    write_complex(guard.file(INITIAL), req.psi0)?;

    let mut schema = record_schema();
    schema["run"] = serde_json::json!({
        "name": req.name,
        "dim": grid.dim,
        "grid": grid,
        "gamma": solver.gamma,
        "pressure": solver.pressure_enabled,
    });
    fs::write(guard.file(SCHEMA), serde_json::to_vec_pretty(&schema)?)?;

    let snaps = guard.root.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snaps)?;
    guard.dirs.push(snaps);

    let sink = BufWriter::new(File::create(guard.file(DIAGNOSTICS))?);
    let mut diag = DiagnosticsObserver::new(req.diagnostics, grid.dim).with_sink(Box::new(sink));
    let mut entries: Vec<SnapshotEntry> = Vec::new();
    let every = req.snapshots == SnapshotPolicy::Every;
    let trajectory = {
        let root = guard.root.clone();
        let written = &mut guard.files;
        let entries = &mut entries;
        let mut writer = |t: f64, psi: &ComplexField| -> Result<()> {
            if every {
                let rel = snapshot_name(entries.len());
                let path = root.join(&rel);
                written.push(path.clone());
                write_complex(&path, psi)?;
                entries.push(SnapshotEntry { t, path: rel });
            }
            Ok(())
        };
        evolve(req.psi0, &solver, &mut [&mut diag, &mut writer as &mut dyn Observer])?
    };
    if !every {
        let rel = snapshot_name(0);
        write_complex(guard.file(&rel), &trajectory.final_state)?;
        entries.push(SnapshotEntry { t: trajectory.final_time(), path: rel });
    }
    let records = diag.finish()?;
    log::info!(
        "{}: {} steps in {:.2}s ({:.2}s in observers)",
        req.name,
        trajectory.stats.steps,
        trajectory.stats.wall_seconds,
        trajectory.stats.observer_seconds
    );

    let (config_hash, config) = match req.config {
        Some((h, c)) => (Some(h), Some(c)),
        None => (None, None),
    };
    let manifest = Manifest {
        name: req.name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        config,
        grid,
        solver,
        steps: trajectory.stats.steps,
        dt_used: trajectory.stats.dt_used,
        final_time: trajectory.final_time(),
        cfl_exceeded: trajectory.stats.cfl_exceeded,
        boundary_warnings: trajectory.stats.boundary_warnings,
        outputs: Outputs {
            initial: INITIAL.into(),
            diagnostics: DIAGNOSTICS.into(),
            schema: SCHEMA.into(),
            snapshots: entries,
        },
    };
    fs::write(guard.file(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    guard.committed = true;
    Ok(RunSummary {
        manifest,
        records,
        trajectory,
    })
}

/// Reads an NDJSON diagnostics stream.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path.as_ref())?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                QhdError::Format(format!("{} line {}: {e}", path.as_ref().display(), i + 1))
            })
        })
        .collect()
}
