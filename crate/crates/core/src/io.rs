//! Text formats: trace CSV (`time_s,voltage_v`), trajectory CSV
//! (`time_s,occupancy,temperature_K`), and `key = value` sidecars.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is lossless and output is byte-stable across runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dynamics::PhotonTrajectory;
use crate::error::{Error, Result};
use crate::synth::{NoiseTrace, TraceMetadata};

pub const TRACE_HEADER: &str = "time_s,voltage_v";
pub const TRAJECTORY_HEADER: &str = "time_s,occupancy,temperature_K";

pub fn write_trace_csv<W: Write>(mut w: W, trace: &NoiseTrace) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (k, v) in trace.voltages_v.iter().enumerate() {
        writeln!(w, "{},{}", trace.time_at(k), v)?;
    }
    w.flush()?;
    Ok(())
}

fn format_error(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn parse_field(field: &str, line: usize, name: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format_error(line, format!("{name} '{}' is not a number", field.trim())))?;
    if !v.is_finite() {
        return Err(format_error(line, format!("{name} is not finite")));
    }
    Ok(v)
}

/// Reads a trace CSV. The time column must be uniformly spaced (to 1e-6 of
/// the interval) and hold at least two samples. Errors carry the 1-based
/// line number.
pub fn read_trace_csv<R: BufRead>(r: R) -> Result<NoiseTrace> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_error(1, "empty file"))??;
    if header.trim_end_matches('\r') != TRACE_HEADER {
        return Err(format_error(1, format!("expected header '{TRACE_HEADER}', found '{header}'")));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut volts = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(t), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(format_error(line_no, "expected two comma-separated fields"));
        };
        let t = parse_field(t, line_no, "time")?;
        let v = parse_field(v, line_no, "voltage")?;
        if let (Some(&t0), Some(&t1)) = (times.first(), times.get(1)) {
            let dt: f64 = t1 - t0;
            let expected = t0 + times.len() as f64 * dt;
            if (t - expected).abs() > 1e-6 * dt.abs() {
                return Err(format_error(line_no, format!("time {t} breaks the uniform grid (expected {expected})")));
            }
        } else if let Some(&t0) = times.first() {
            if !(t > t0) {
                return Err(format_error(line_no, "time must increase"));
            }
        }
        times.push(t);
        volts.push(v);
    }
    if times.len() < 2 {
        return Err(format_error(times.len() + 1, "a trace needs at least two samples"));
    }
    Ok(NoiseTrace {
        start_s: times[0],
        sample_interval_s: times[1] - times[0],
        voltages_v: volts,
        metadata: TraceMetadata::default(),
    })
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &PhotonTrajectory) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for ((t, q), temp) in traj.times_s.iter().zip(&traj.occupancy).zip(&traj.temperature_k) {
        writeln!(w, "{t},{q},{temp}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `key = value` lines in key order.
pub fn write_key_values<W: Write>(mut w: W, entries: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn read_key_values<R: BufRead>(r: R) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_error(i + 1, "expected 'key = value'"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format_error(i + 1, "empty key"));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(format_error(i + 1, format!("duplicate key '{k}'")));
        }
    }
    Ok(out)
}

impl TraceMetadata {
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("seed".into(), self.seed.to_string());
        if let Some(i) = self.shot_index {
            m.insert("shot_index".into(), i.to_string());
        }
        m.insert("config_digest".into(), self.config_digest.clone());
        m.insert(
            "disconnect_times_s".into(),
            self.disconnect_times_s
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        m
    }

    /// Unknown keys are ignored so sidecars can carry extra context.
    pub fn from_key_values(m: &BTreeMap<String, String>) -> Result<Self> {
        let bad = |k: &str| format_error(0, format!("metadata key '{k}' has an invalid value"));
        let seed = match m.get("seed") {
            Some(v) => v.parse().map_err(|_| bad("seed"))?,
            None => 0,
        };
        let shot_index = match m.get("shot_index") {
            Some(v) => Some(v.parse().map_err(|_| bad("shot_index"))?),
            None => None,
        };
        let disconnect_times_s = match m.get("disconnect_times_s") {
            Some(v) if !v.is_empty() => v
                .split(';')
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad("disconnect_times_s")))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        Ok(TraceMetadata {
            seed,
            shot_index,
            config_digest: m.get("config_digest").cloned().unwrap_or_default(),
            disconnect_times_s,
        })
    }
}

/// Sidecar path of a trace file: same stem, `.meta` extension.
pub fn sidecar_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("meta")
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes `path` and its `.meta` sidecar.
pub fn write_trace_file(path: &Path, trace: &NoiseTrace) -> Result<()> {
    let f = File::create(path).map_err(|e| io_context(path, e))?;
    write_trace_csv(BufWriter::new(f), trace)?;
    let meta = sidecar_path(path);
    let f = File::create(&meta).map_err(|e| io_context(&meta, e))?;
    write_key_values(BufWriter::new(f), &trace.metadata.to_key_values())
}

/// Reads `path` and, when present, its `.meta` sidecar.
pub fn read_trace_file(path: &Path) -> Result<NoiseTrace> {
    let f = File::open(path).map_err(|e| io_context(path, e))?;
    let mut trace = read_trace_csv(BufReader::new(f)).map_err(|e| match e {
        Error::Format { line, message } => Error::Format {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    let meta = sidecar_path(path);
    if meta.exists() {
        let f = File::open(&meta).map_err(|e| io_context(&meta, e))?;
        trace.metadata = TraceMetadata::from_key_values(&read_key_values(BufReader::new(f))?)?;
    }
    Ok(trace)
}

pub fn write_trajectory_file(path: &Path, traj: &PhotonTrajectory) -> Result<()> {
    let f = File::create(path).map_err(|e| io_context(path, e))?;
    write_trajectory_csv(BufWriter::new(f), traj)
}
