//! Command-line front end: `steady`, `sweep`, `simulate` and `analyze`
//! driven by a TOML run configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use precool::Execution;

use crate::commands::{AnalyzeOptions, Context};
use crate::config::RunConfig;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "precool", version, about = "Cavity pre-cooling noise toolkit")]
pub struct Cli {
    /// Run configuration (TOML); the shipped bench setup when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides `synth.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Sorted `key=value` output.
    #[arg(long, global = true)]
    pub porcelain: bool,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Run on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state mode temperatures, occupancies and bath shares.
    Steady,
    /// Mode temperature over a (coupling, cold-load temperature) grid.
    Sweep(SweepArgs),
    /// Photon dynamics plus synthetic receiver traces.
    Simulate(SimulateArgs),
    /// Warm-up fit, band ΔP and inferred mode temperature from traces.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Overrides `sweep.coupling_min`.
    #[arg(long, value_name = "COUPLING")]
    pub coupling_min: Option<f64>,
    /// Overrides `sweep.coupling_max`.
    #[arg(long, value_name = "COUPLING")]
    pub coupling_max: Option<f64>,
    /// Overrides `sweep.coupling_points`.
    #[arg(long, value_name = "N")]
    pub coupling_points: Option<usize>,
    /// Overrides `sweep.cold_temperature_min_k`.
    #[arg(long, value_name = "KELVIN")]
    pub cold_min_k: Option<f64>,
    /// Overrides `sweep.cold_temperature_max_k`.
    #[arg(long, value_name = "KELVIN")]
    pub cold_max_k: Option<f64>,
    /// Overrides `sweep.cold_temperature_points`.
    #[arg(long, value_name = "N")]
    pub cold_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Overrides `synth.shots`.
    #[arg(long)]
    pub shots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trace CSV files or directories holding `trace_*.csv`.
    #[arg(required = true, value_name = "TRACE")]
    pub traces: Vec<PathBuf>,

    /// Disconnect time in seconds; read from the `.meta` sidecar otherwise.
    #[arg(long, value_name = "SECONDS")]
    pub switch_time: Option<f64>,

    /// Write `psd.csv` with the cooled and ambient spectra.
    #[arg(long)]
    pub emit_psd: bool,

    /// Write `deltap_curve.csv`, ΔP against mode temperature.
    #[arg(long)]
    pub emit_deltap_curve: bool,
}

/// Default directory for `simulate` without `--out`.
pub const DEFAULT_SIMULATE_DIR: &str = "precool-out";

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::shipped(),
    };
    if let Some(seed) = cli.seed {
        cfg.synth.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    let ctx = Context {
        porcelain: cli.porcelain,
        out: cli.out.clone(),
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    match &cli.command {
        Command::Steady => {
            let resolved = cfg.resolve()?;
            commands::steady(&resolved)?.write(stdout, ctx.porcelain)?;
        }
        Command::Sweep(a) => {
            let s = &mut cfg.sweep;
            s.coupling_min = a.coupling_min.unwrap_or(s.coupling_min);
            s.coupling_max = a.coupling_max.unwrap_or(s.coupling_max);
            s.coupling_points = a.coupling_points.unwrap_or(s.coupling_points);
            s.cold_temperature_min_k = a.cold_min_k.unwrap_or(s.cold_temperature_min_k);
            s.cold_temperature_max_k = a.cold_max_k.unwrap_or(s.cold_temperature_max_k);
            s.cold_temperature_points = a.cold_points.unwrap_or(s.cold_temperature_points);
            let resolved = cfg.resolve()?;
            match &ctx.out {
                None => {
                    commands::sweep(&resolved, &resolved.sweep, ctx.exec, stdout)?;
                }
                Some(dir) => {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                    let path = dir.join("sweep.csv");
                    let mut w = std::io::BufWriter::new(
                        std::fs::File::create(&path)
                            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                    );
                    let cells = commands::sweep(&resolved, &resolved.sweep, ctx.exec, &mut w)?;
                    let mut r = report::Report::default();
                    r.text("sweep_csv", path.display().to_string()).count("cells", cells as u64);
                    r.write(stdout, ctx.porcelain)?;
                }
            }
        }
        Command::Simulate(a) => {
            if let Some(n) = a.shots {
                cfg.synth.shots = n;
            }
            let resolved = cfg.resolve()?;
            let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_SIMULATE_DIR));
            commands::simulate(&resolved, &dir, ctx.exec)?.write(stdout, ctx.porcelain)?;
        }
        Command::Analyze(a) => {
            let resolved = cfg.resolve()?;
            let paths = commands::collect_trace_paths(&a.traces)?;
            let opts = AnalyzeOptions {
                switch_time_s: a.switch_time,
                emit_psd: a.emit_psd,
                emit_deltap_curve: a.emit_deltap_curve,
            };
            let outcome = commands::analyze(&resolved, &paths, &opts, ctx.out.as_deref(), ctx.exec)?;
            outcome.report.write(stdout, ctx.porcelain)?;
            if let Some(e) = outcome.failure {
                return Err(e);
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 2;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) | Err(CliError::OutputClosed) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
