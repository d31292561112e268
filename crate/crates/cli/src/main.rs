//! `qhd`: command-line front end.
//!
//! Exit status is 0 on success, 1 when a computation fails and 2 for usage
//! or configuration errors. `QHD_THREADS` caps the worker count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qhd_core::evolve::{KappaMode, SolverConfig};
use qhd_core::fields::{read_complex, write_complex};
use qhd_core::functionals::{diagnose, DiagnosticsConfig, MorawetzMode, PowerLaw};
use qhd_core::polar::{read_hydro, write_hydro, HydroData};
use qhd_core::runner::{
    decay_fit_file, hydro_of, initial_state, lift_data, read_vortices, run_parsed, run_to_dir,
    stability_experiment, RunRequest, Scenario, SnapshotPolicy,
};
use qhd_core::{QhdError, Result};

#[derive(Parser)]
#[command(name = "qhd", version, about = "Quantum hydrodynamics laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lift hydrodynamic data (sqrt_rho, Lambda) to a wave function.
    Lift {
        #[arg(long)]
        input: PathBuf,
        /// JSON list of vortices, `[{"x": [a, b], "k": n}, ...]`.
        #[arg(long)]
        vortices: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Regularization index for radial data.
        #[arg(long, default_value_t = 10_000)]
        n_reg: u32,
    },
    /// Evolve a stored wave function into a run directory.
    Evolve {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "auto")]
        morawetz: MorawetzMode,
        /// Keep a snapshot at every observation or only the final state.
        #[arg(long, default_value = "every", value_parser = ["every", "final"])]
        snapshots: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print the diagnostics record of a stored wave function as JSON.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        no_pressure: bool,
        /// Time the state belongs to (enters V and the rarefaction distance).
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value = "auto")]
        morawetz: MorawetzMode,
        #[arg(long, default_value = "qhd")]
        kappa: KappaMode,
        /// Vortices to check circulation around.
        #[arg(long)]
        vortices: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Also store the Madelung data (sqrt_rho, Lambda) here.
        #[arg(long)]
        hydro_output: Option<PathBuf>,
    },
    /// Fit `q(t) ~ C t^a` to one field of a diagnostics stream; `a` is reported signed.
    DecayFit {
        #[arg(long)]
        diag: PathBuf,
        /// Record field, e.g. grad_sqrt_rho, rho_gamma, rarefaction_sq.
        #[arg(long)]
        quantity: String,
        /// Fit window `t0,t1`; defaults to [max(5, T/10), 0.8 T].
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Run the regularized-sequence convergence experiment for a scenario.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        ladder: Vec<u32>,
        /// Side of the local cube as a fraction of the box side.
        #[arg(long, default_value_t = 0.5)]
        sub_box: f64,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Scenario files.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Build, evolve and diagnose the scenario, writing its run directory.
    Run {
        config: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    no_pressure: bool,
    #[arg(long, default_value = "qhd")]
    kappa: KappaMode,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(self.gamma, self.dt, self.t_end).with_stride(self.stride);
        c.pressure_enabled = !self.no_pressure;
        c.kappa_mode = self.kappa;
        c
    }
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `t0,t1`")?;
    let t0: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let t1: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(format!("need 0 < t0 < t1, got {t0}, {t1}"));
    }
    Ok((t0, t1))
}

fn law(gamma: f64, pressure: bool) -> PowerLaw {
    PowerLaw { gamma, enabled: pressure }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize, force: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            if p.exists() && !force {
                return Err(QhdError::OutputExists(p.display().to_string()));
            }
            fs::write(p, text + "\n")?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lift { input, vortices, output, n_reg } => {
            let data = read_hydro(&input)?;
            let vs = vortices.map(read_vortices).transpose()?.unwrap_or_default();
            let psi = lift_data(&data, &vs, n_reg)?;
            write_complex(&output, &psi)
        }
        Command::Evolve { input, solver, morawetz, snapshots, out, force } => {
            let psi = read_complex(&input)?;
            let cfg = solver.config();
            let mut diagnostics = DiagnosticsConfig::new(law(cfg.gamma, cfg.pressure_enabled)).with_morawetz(morawetz);
            diagnostics.kappa = cfg.kappa_mode;
            let name = input.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            let summary = run_to_dir(RunRequest {
                name: &name,
                psi0: &psi,
                solver: cfg,
                diagnostics,
                snapshots: if snapshots == "final" { SnapshotPolicy::Final } else { SnapshotPolicy::Every },
                out_dir: &out,
                force,
                config: None,
            })?;
            eprintln!("{} steps, {} records written to {}", summary.manifest.steps, summary.records.len(), out.display());
            Ok(())
        }
        Command::Diagnose { input, gamma, no_pressure, t, morawetz, kappa, vortices, radius, hydro_output } => {
            let psi = read_complex(&input)?;
            let mut cfg = DiagnosticsConfig::new(law(gamma, !no_pressure)).with_morawetz(morawetz);
            cfg.kappa = kappa;
            let mut positions = vortices.map(read_vortices).transpose()?.unwrap_or_default();
            if !positions.is_empty() {
                cfg = cfg.tracking(positions.clone(), radius);
            }
            let record = diagnose(&psi, t, &cfg, &mut positions)?;
            if let Some(p) = hydro_output {
                write_hydro(&p, &hydro_of(&psi)?)?;
            }
            let mut out = std::io::stdout().lock();
            serde_json::to_writer(&mut out, &record)?;
            writeln!(out)?;
            Ok(())
        }
        Command::DecayFit { diag, quantity, window } => {
            let fit = decay_fit_file(&diag, &quantity, window)?;
            write_json(None, &fit, false)
        }
        Command::Stability { config, ladder, sub_box, output, force } => {
            if let Some(p) = &output {
                if p.exists() && !force {
                    return Err(QhdError::OutputExists(p.display().to_string()));
                }
            }
            let scenario = Scenario::parse(&fs::read_to_string(&config)?)?;
            let init = initial_state(&scenario)?;
            let h = match init.hydro {
                Some(HydroData::Periodic(h)) => h,
                Some(HydroData::Radial(_)) => {
                    return Err(QhdError::UnsupportedGrid("stability needs a periodic scenario".into()))
                }
                None => match hydro_of(&init.psi)? {
                    HydroData::Periodic(h) => h,
                    HydroData::Radial(_) => {
                        return Err(QhdError::UnsupportedGrid("stability needs a periodic scenario".into()))
                    }
                },
            };
            let report = stability_experiment(&h, &ladder, &scenario.solver, sub_box)?;
            write_json(output.as_deref(), &report, force)
        }
        Command::Scenario { action: ScenarioAction::Run { config, force } } => {
            let scenario = Scenario::parse(&fs::read_to_string(&config)?)?;
            let summary = run_parsed(&scenario, force)?;
            eprintln!(
                "{}: {} records, {} snapshots in {}",
                scenario.name,
                summary.records.len(),
                summary.manifest.outputs.snapshots.len(),
                scenario.output_dir.display()
            );
            Ok(())
        }
    }
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("QHD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("QHD_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
