use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use precool::analysis::PowerSpectrum;
use precool::dynamics::relaxation_rate;
use precool::io::{read_trace_file, write_key_values, write_trace_file, write_trajectory_file};
use precool::noise::{photon_occupancy, sweep_mode_temperature, BathSet, SweepGrid};
use precool::pipeline::{analyze_traces, WarmupAnalysis};
use precool::receiver::emit_deltap_curve;
use precool::synth::{shot_seed, NoiseTrace};
use precool::Execution;

use crate::config::{Resolved, SweepSection};
use crate::error::CliError;
use crate::report::Report;

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub porcelain: bool,
    pub out: Option<PathBuf>,
    pub exec: Execution,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn add_contributions(
    report: &mut Report,
    prefix: &str,
    baths: &BathSet,
    names: &[&str],
) -> Result<(), CliError> {
    let labels = std::iter::once("intrinsic").chain(names.iter().copied());
    for (label, c) in labels.zip(baths.contributions()?) {
        report
            .number(format!("{prefix}.{label}.weight"), c.weight, "")
            .number(format!("{prefix}.{label}.temperature_k"), c.temperature_k, "K")
            .number(format!("{prefix}.{label}.share_k"), c.kelvin(), "K");
    }
    Ok(())
}

/// Steady-state temperatures, occupancies and per-bath shares of the
/// cooled and ambient configurations.
pub fn steady(cfg: &Resolved) -> Result<Report, CliError> {
    let e = &cfg.experiment;
    let f = e.mode.frequency_hz();
    let t_cooled = e.cooled_temperature_k()?;
    let t_ambient = e.ambient_temperature_k()?;
    let cooled_set = e.cooling.union(e.monitoring);
    let mut r = Report::default();
    r.number("t_cooled_k", t_cooled, "K")
        .number("t_ambient_k", t_ambient, "K")
        .number("occupancy_cooled", photon_occupancy(f, t_cooled)?, "")
        .number("occupancy_ambient", photon_occupancy(f, t_ambient)?, "")
        .number("delta_p_db", e.steady_deltap_db()?, "dB")
        .number("tau_cool_s", 1.0 / relaxation_rate(&e.mode, &e.baths, cooled_set), "s")
        .number("tau_warm_s", e.warm_up_time_s(), "s");

    let names_in = |set: precool::dynamics::PortSet| -> Vec<&str> {
        set.indices().map(|i| cfg.port_names[i].as_str()).collect()
    };
    add_contributions(
        &mut r,
        "cooled",
        &e.baths.subset(|i| cooled_set.contains(i)),
        &names_in(cooled_set),
    )?;
    add_contributions(
        &mut r,
        "ambient",
        &e.baths.subset(|i| e.monitoring.contains(i)),
        &names_in(e.monitoring),
    )?;
    Ok(r)
}

pub const SWEEP_HEADER: &str = "coupling,cold_temperature_k,mode_temperature_k,occupancy";

/// Mode temperature over a grid of couplings and cold-load temperatures for
/// the first cooling port; the other ports stay as configured.
pub fn sweep(cfg: &Resolved, grid: &SweepSection, exec: Execution, w: &mut dyn Write) -> Result<usize, CliError> {
    grid.validate()?;
    let e = &cfg.experiment;
    let swept = e
        .cooling
        .indices()
        .next()
        .ok_or_else(|| CliError::config("port", "a sweep needs a port with role = \"cooling\""))?;
    let grid = SweepGrid {
        mode: e.mode,
        base: e.baths.subset(|i| i != swept),
        template: e.baths.ports()[swept],
        couplings: grid.couplings(),
        cold_temperatures_k: grid.cold_temperatures_k(),
    };
    let cells = sweep_mode_temperature(&grid, exec)?;
    writeln!(w, "{SWEEP_HEADER}")?;
    for c in &cells {
        writeln!(
            w,
            "{},{},{},{}",
            c.coupling, c.cold_temperature_k, c.mode_temperature_k, c.occupancy
        )?;
    }
    w.flush()?;
    Ok(cells.len())
}

pub fn trace_file_name(shot: usize) -> String {
    format!("trace_{shot:04}.csv")
}

/// Runs the dynamics and writes `trajectory.csv`, one trace per shot with
/// its sidecar, and `run.meta` with the configured ground truth.
pub fn simulate(cfg: &Resolved, dir: &Path, exec: Execution) -> Result<Report, CliError> {
    let e = &cfg.experiment;
    let sim = e.simulate()?;
    let plan = e.plan(&sim)?;
    ensure_dir(dir)?;
    write_trajectory_file(&dir.join("trajectory.csv"), &sim.trajectory)?;

    let seed = e.synth.seed;
    let written = exec.map_indexed(cfg.shots, |i| {
        let trace = plan.trace(shot_seed(seed, i as u64), Some(i as u64));
        write_trace_file(&dir.join(trace_file_name(i)), &trace)
    });
    written.into_iter().collect::<precool::Result<Vec<()>>>()?;

    let disconnects = sim.disconnect_times_s();
    let mut r = Report::default();
    r.text("output_dir", dir.display().to_string())
        .count("shots", cfg.shots as u64)
        .count("seed", seed)
        .count("samples_per_trace", plan.sample_count() as u64)
        .number("sample_interval_s", e.synth.sample_interval_s, "s")
        .text(
            "disconnect_times_s",
            disconnects.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";"),
        )
        .number("t_cooled_k", e.cooled_temperature_k()?, "K")
        .number("t_ambient_k", e.ambient_temperature_k()?, "K")
        .number("delta_p_db", e.steady_deltap_db()?, "dB")
        .number("tau_warm_s", e.warm_up_time_s(), "s")
        .text("config_digest", cfg.digest.clone());

    let meta_path = dir.join("run.meta");
    let entries = r
        .porcelain_lines()
        .into_iter()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .filter(|(k, _)| k != "output_dir")
        .collect();
    write_key_values(create(&meta_path)?, &entries)?;
    log::info!("wrote {} traces to {}", cfg.shots, dir.display());
    Ok(r)
}

/// Expands directories into their `trace_*.csv` files, in name order.
pub fn collect_trace_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| io_error(input, e))?
                .filter_map(|entry| entry.ok().map(|d| d.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("trace_") && n.ends_with(".csv"))
                })
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    if paths.is_empty() {
        return Err(CliError::Usage("no trace files to analyze".into()));
    }
    Ok(paths)
}

/// First CSV line at which `b`'s time column departs from `a`'s.
fn grid_mismatch_line(a: &NoiseTrace, b: &NoiseTrace) -> Option<usize> {
    if a.same_grid(b) {
        return None;
    }
    let tol = 1e-6 * a.sample_interval_s;
    let k = (0..a.len().min(b.len()))
        .find(|&k| (a.time_at(k) - b.time_at(k)).abs() > tol)
        .unwrap_or(a.len().min(b.len()));
    Some(k + 2)
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub switch_time_s: Option<f64>,
    pub emit_psd: bool,
    pub emit_deltap_curve: bool,
}

pub fn read_traces(paths: &[PathBuf]) -> Result<Vec<NoiseTrace>, CliError> {
    let traces = paths
        .iter()
        .map(|p| read_trace_file(p))
        .collect::<precool::Result<Vec<_>>>()?;
    for (p, t) in paths.iter().zip(&traces).skip(1) {
        if let Some(line) = grid_mismatch_line(&traces[0], t) {
            return Err(CliError::Format {
                line,
                message: format!("{}: time grid differs from {}", p.display(), paths[0].display()),
            });
        }
    }
    Ok(traces)
}

fn analysis_report(cfg: &Resolved, a: &WarmupAnalysis, switch_s: f64, dt: f64) -> Report {
    let mut r = Report::default();
    r.count("shots", a.shots as u64)
        .number("sample_interval_s", dt, "s")
        .number("switch_time_s", switch_s, "s")
        .count("series_points", a.series.len() as u64);
    match &a.fit {
        Ok(fit) => {
            r.text("fit.status", if fit.converged { "converged" } else { "not_converged" })
                .text("fit.single_exponential", fit.single_exponential.to_string())
                .count("fit.iterations", fit.iterations as u64)
                .count("fit.points", fit.points as u64)
                .number("fit.a1_db", fit.a1_db, "dB")
                .number("fit.a1_se_db", fit.standard_errors.a1_db, "dB")
                .number("fit.a2_db", fit.a2_db, "dB")
                .number("fit.a2_se_db", fit.standard_errors.a2_db, "dB")
                .number("fit.tau1_s", fit.tau1_s, "s")
                .number("fit.tau1_se_s", fit.standard_errors.tau1_s, "s")
                .number("fit.tau2_s", fit.tau2_s, "s")
                .number("fit.tau2_se_s", fit.standard_errors.tau2_s, "s")
                .number("fit.residual_norm_db", fit.residual_norm, "dB")
                .number("tau_warm_s", fit.warm_up_time_s(), "s")
                .number("tau_warm_se_s", fit.standard_errors.tau2_s, "s");
        }
        Err(e) => {
            r.text("fit.status", format!("failed: {e}"));
        }
    }
    if let Some(d) = a.depth {
        r.number("delta_p_db", d.delta_p_db, "dB")
            .number("delta_p_se_db", d.standard_error_db, "dB");
    }
    if let Some(pre) = a.pre_disconnect_deltap_db {
        r.number("pre_disconnect_delta_p_db", pre, "dB");
    }
    match &a.band {
        Ok(b) => {
            r.number("band.delta_p_db", b.delta_p_db, "dB")
                .number("band.delta_p_se_db", b.standard_error_db, "dB")
                .count("band.bins", b.bins as u64);
        }
        Err(e) => {
            r.text("band.status", format!("unavailable: {e}"));
        }
    }
    let e = &cfg.experiment;
    if let Ok(t_amb) = e.ambient_temperature_k() {
        r.number("t_ambient_k", t_amb, "K");
        match a.inferred_mode_temperature_k(t_amb, &e.chain) {
            Ok(t) => r.number("t_mode_inferred_k", t, "K"),
            Err(err) => r.text("t_mode_inferred.status", format!("unavailable: {err}")),
        };
    }
    r
}

fn write_psd(path: &Path, cold: &PowerSpectrum, ambient: &PowerSpectrum) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "frequency_hz,cold_v2_per_hz,ambient_v2_per_hz")?;
    for ((f, c), a) in cold.frequencies_hz.iter().zip(&cold.density).zip(&ambient.density) {
        writeln!(w, "{f},{c},{a}")?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of `analyze`: the report is printed even when the fit failed.
pub struct AnalyzeOutcome {
    pub report: Report,
    pub failure: Option<CliError>,
}

/// Full analysis chain on stored traces. Tables go to `dir`.
pub fn analyze(
    cfg: &Resolved,
    paths: &[PathBuf],
    opts: &AnalyzeOptions,
    dir: Option<&Path>,
    exec: Execution,
) -> Result<AnalyzeOutcome, CliError> {
    let traces = read_traces(paths)?;
    let switch_s = match opts.switch_time_s {
        Some(t) => t,
        None => *traces[0].metadata.disconnect_times_s.first().ok_or_else(|| {
            CliError::Usage("no switch time: pass --switch-time or keep the .meta sidecars".into())
        })?,
    };
    let dt = traces[0].sample_interval_s;
    let a = analyze_traces(&traces, switch_s, &cfg.experiment.analysis, exec)?;
    let report = analysis_report(cfg, &a, switch_s, dt);

    let emitting = opts.emit_psd || opts.emit_deltap_curve;
    let dir = match dir {
        Some(d) => Some(d.to_path_buf()),
        None if emitting => Some(PathBuf::from(".")),
        None => None,
    };
    if let Some(dir) = &dir {
        ensure_dir(dir)?;
        let mut w = create(&dir.join("analysis.txt"))?;
        for line in report.porcelain_lines() {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        let mut w = create(&dir.join("deltap_series.csv"))?;
        writeln!(w, "time_s,delta_p_db")?;
        for p in &a.series {
            if let Some(v) = p.delta_p_db {
                writeln!(w, "{},{v}", p.time_s)?;
            }
        }
        w.flush()?;
        if opts.emit_psd {
            match (&a.psd_cold, &a.psd_ambient) {
                (Some(c), Some(amb)) => write_psd(&dir.join("psd.csv"), c, amb)?,
                _ => log::warn!("traces are too short for one PSD segment; psd.csv not written"),
            }
        }
        if opts.emit_deltap_curve {
            let e = &cfg.experiment;
            let t_amb = e.ambient_temperature_k()?;
            let curve = emit_deltap_curve(&e.chain, t_amb, 0.0, t_amb, 256)?;
            let mut w = create(&dir.join("deltap_curve.csv"))?;
            writeln!(w, "t_mode_k,delta_p_db")?;
            for p in curve {
                writeln!(w, "{},{}", p.t_mode_k, p.delta_p_db)?;
            }
            w.flush()?;
        }
    }

    let failure = match &a.fit {
        Err(e) => Some(CliError::Analysis(e.to_string())),
        Ok(f) if !f.converged => Some(CliError::Analysis("warm-up fit did not converge".into())),
        Ok(_) => None,
    };
    Ok(AnalyzeOutcome { report, failure })
}
