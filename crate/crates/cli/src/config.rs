//! Run configuration: a sectioned TOML file whose keys carry their units.
//!
//! Every section except `[[port]]` falls back to the bench setup when
//! omitted; a file without `[[port]]` tables describes an isolated mode.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use precool::analysis::NoiseExtractionConfig;
use precool::dynamics::{PortSet, ProtocolTiming};
use precool::io::read_trace_file;
use precool::noise::{linspace, BathPort, BathSet, CavityMode, LossModel};
use precool::pipeline::{AnalysisConfig, WarmupExperiment};
use precool::receiver::{LnaNoiseParameters, ReceiverChain};
use precool::synth::SynthConfig;

use crate::error::{CliError, KeyContext};

/// The configuration shipped with the tool.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default, rename = "port", skip_serializing_if = "Vec::is_empty")]
    pub ports: Vec<PortSection>,
    #[serde(default)]
    pub receiver: ReceiverSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub frequency_hz: f64,
    pub intrinsic_q: f64,
    pub intrinsic_temperature_k: f64,
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection {
            frequency_hz: 1.4495e9,
            intrinsic_q: 164_000.0,
            intrinsic_temperature_k: 290.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortRole {
    /// Connected only while cooling.
    Cooling,
    /// Connected throughout; the receiver listens here.
    Monitoring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossModelName {
    Exact,
    Linear,
    None,
}

impl From<LossModelName> for LossModel {
    fn from(m: LossModelName) -> Self {
        match m {
            LossModelName::Exact => LossModel::Exact,
            LossModelName::Linear => LossModel::Linear,
            LossModelName::None => LossModel::None,
        }
    }
}

fn default_link_temperature() -> f64 {
    290.0
}

fn default_loss_model() -> LossModelName {
    LossModelName::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSection {
    pub name: String,
    pub role: PortRole,
    pub coupling: f64,
    pub load_temperature_k: f64,
    #[serde(default)]
    pub link_loss_db: f64,
    #[serde(default = "default_link_temperature")]
    pub link_temperature_k: f64,
    #[serde(default = "default_loss_model")]
    pub loss_model: LossModelName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverSection {
    pub t_min_k: f64,
    pub noise_resistance_ohm: f64,
    pub gamma_opt_re: f64,
    pub gamma_opt_im: f64,
    pub linear_gain: f64,
    pub reference_impedance_ohm: f64,
    pub t_rec_k: f64,
    pub gamma_cavity_re: f64,
    pub gamma_cavity_im: f64,
    pub t_image_k: f64,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        let chain = ReceiverChain::bench_reference();
        let lna = chain.front_end;
        ReceiverSection {
            t_min_k: lna.t_min_k,
            noise_resistance_ohm: lna.noise_resistance_ohm,
            gamma_opt_re: lna.gamma_opt.re,
            gamma_opt_im: lna.gamma_opt.im,
            linear_gain: lna.linear_gain,
            reference_impedance_ohm: lna.reference_z0_ohm,
            t_rec_k: chain.t_rec_k,
            gamma_cavity_re: chain.gamma_c.re,
            gamma_cavity_im: chain.gamma_c.im,
            t_image_k: chain.t_image_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub cool_duration_s: f64,
    pub interrogate_delay_s: f64,
    pub trace_length_s: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            cool_duration_s: 40e-6,
            interrogate_delay_s: 0.0,
            trace_length_s: 140e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub sample_interval_s: f64,
    pub seed: u64,
    pub shots: usize,
    pub one_over_f_corner_hz: f64,
    pub artifact_duration_s: f64,
    pub artifact_amplitude_v: f64,
    pub voltage_scale: f64,
    /// Trace CSV whose voltages are added to every shot; relative paths
    /// resolve against the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injected_signal_file: Option<PathBuf>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        SynthSection {
            sample_interval_s: s.sample_interval_s,
            seed: 1,
            shots: 512,
            one_over_f_corner_hz: s.one_over_f_corner_hz,
            artifact_duration_s: s.artifact_duration_s,
            artifact_amplitude_v: 500.0,
            voltage_scale: s.voltage_scale,
            injected_signal_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub boxcar_width_s: f64,
    pub window_samples: usize,
    pub exclude_before_s: f64,
    pub fit_span_s: f64,
    pub reference_offset_s: f64,
    pub psd_segment_samples: usize,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let a = AnalysisConfig::default();
        AnalysisSection {
            boxcar_width_s: a.extraction.map_or(0.0, |e| e.boxcar_width_s),
            window_samples: a.window_samples,
            exclude_before_s: a.exclude_before_s,
            fit_span_s: a.fit_span_s,
            reference_offset_s: a.reference_offset_s,
            psd_segment_samples: a.psd_segment_samples,
            band_low_hz: a.band_hz.0,
            band_high_hz: a.band_hz.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub coupling_min: f64,
    pub coupling_max: f64,
    pub coupling_points: usize,
    pub cold_temperature_min_k: f64,
    pub cold_temperature_max_k: f64,
    pub cold_temperature_points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            coupling_min: 0.0,
            coupling_max: 20.0,
            coupling_points: 21,
            cold_temperature_min_k: 0.0,
            cold_temperature_max_k: 290.0,
            cold_temperature_points: 30,
        }
    }
}

impl SweepSection {
    pub fn couplings(&self) -> Vec<f64> {
        linspace(self.coupling_min, self.coupling_max, self.coupling_points)
    }

    pub fn cold_temperatures_k(&self) -> Vec<f64> {
        linspace(
            self.cold_temperature_min_k,
            self.cold_temperature_max_k,
            self.cold_temperature_points,
        )
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check_non_negative("sweep.coupling_min", self.coupling_min)?;
        check_non_negative("sweep.cold_temperature_min_k", self.cold_temperature_min_k)?;
        if !(self.coupling_max >= self.coupling_min) {
            return Err(CliError::config("sweep.coupling_max", "must not be below coupling_min"));
        }
        if !(self.cold_temperature_max_k >= self.cold_temperature_min_k) {
            return Err(CliError::config(
                "sweep.cold_temperature_max_k",
                "must not be below cold_temperature_min_k",
            ));
        }
        if self.coupling_points == 0 {
            return Err(CliError::config("sweep.coupling_points", "must be at least 1"));
        }
        if self.cold_temperature_points == 0 {
            return Err(CliError::config("sweep.cold_temperature_points", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_non_negative(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CliError::config(key, format!("must be finite and >= 0, got {v}")))
    }
}

fn check_positive(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(key, format!("must be finite and > 0, got {v}")))
    }
}

/// A validated configuration turned into core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: WarmupExperiment,
    pub port_names: Vec<String>,
    pub shots: usize,
    pub sweep: SweepSection,
    pub digest: String,
}

impl RunConfig {
    /// Parses TOML text. Relative paths stay relative; see [`RunConfig::load`].
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = unknown_key(&message).unwrap_or_else(|| locate(text, e.span()));
            CliError::Config { key, message }
        })
    }

    /// Reads a config file; an injected-signal path is made relative to it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(p) = cfg.synth.injected_signal_file.as_mut() {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped config parses")
    }

    /// SHA-256 of the canonical serialisation.
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).expect("config serialises");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let m = &self.mode;
        check_positive("mode.frequency_hz", m.frequency_hz)?;
        check_positive("mode.intrinsic_q", m.intrinsic_q)?;
        check_non_negative("mode.intrinsic_temperature_k", m.intrinsic_temperature_k)?;
        let mode = CavityMode::new(m.frequency_hz, m.intrinsic_q).key("mode")?;

        if self.ports.len() > 64 {
            return Err(CliError::config("port", "at most 64 ports are supported"));
        }
        let mut ports = Vec::with_capacity(self.ports.len());
        let (mut cooling, mut monitoring) = (Vec::new(), Vec::new());
        for (i, p) in self.ports.iter().enumerate() {
            let key = |field: &str| format!("port[{i}].{field}");
            if self.ports[..i].iter().any(|q| q.name == p.name) {
                return Err(CliError::config(key("name"), format!("duplicate port name '{}'", p.name)));
            }
            check_non_negative(&key("coupling"), p.coupling)?;
            check_non_negative(&key("load_temperature_k"), p.load_temperature_k)?;
            check_non_negative(&key("link_loss_db"), p.link_loss_db)?;
            check_non_negative(&key("link_temperature_k"), p.link_temperature_k)?;
            let port = BathPort::new(
                p.coupling,
                p.load_temperature_k,
                p.link_loss_db,
                p.link_temperature_k,
                p.loss_model.into(),
            )
            .key(&key("link_loss_db"))?;
            ports.push(port);
            match p.role {
                PortRole::Cooling => cooling.push(i),
                PortRole::Monitoring => monitoring.push(i),
            }
        }
        let baths = BathSet::new(m.intrinsic_temperature_k, ports).key("mode.intrinsic_temperature_k")?;

        let r = &self.receiver;
        check_non_negative("receiver.t_min_k", r.t_min_k)?;
        check_non_negative("receiver.noise_resistance_ohm", r.noise_resistance_ohm)?;
        check_positive("receiver.linear_gain", r.linear_gain)?;
        check_positive("receiver.reference_impedance_ohm", r.reference_impedance_ohm)?;
        check_non_negative("receiver.t_rec_k", r.t_rec_k)?;
        check_non_negative("receiver.t_image_k", r.t_image_k)?;
        let mut lna = LnaNoiseParameters::new(
            r.t_min_k,
            r.noise_resistance_ohm,
            Complex64::new(r.gamma_opt_re, r.gamma_opt_im),
            r.linear_gain,
        )
        .key("receiver.gamma_opt_re")?;
        lna.reference_z0_ohm = r.reference_impedance_ohm;
        let chain = ReceiverChain {
            gamma_c: Complex64::new(r.gamma_cavity_re, r.gamma_cavity_im),
            t_image_k: r.t_image_k,
            ..ReceiverChain::new(lna, r.t_rec_k).key("receiver.t_rec_k")?
        };
        chain.validate().key("receiver.gamma_cavity_re")?;

        let p = &self.protocol;
        check_non_negative("protocol.cool_duration_s", p.cool_duration_s)?;
        check_non_negative("protocol.interrogate_delay_s", p.interrogate_delay_s)?;
        check_positive("protocol.trace_length_s", p.trace_length_s)?;
        if p.cool_duration_s + p.interrogate_delay_s > p.trace_length_s {
            return Err(CliError::config(
                "protocol.trace_length_s",
                "must cover the cooling time and the interrogation delay",
            ));
        }
        let timing = ProtocolTiming {
            cool_duration_s: p.cool_duration_s,
            interrogate_delay_s: p.interrogate_delay_s,
            trace_length_s: p.trace_length_s,
        };

        let s = &self.synth;
        check_positive("synth.sample_interval_s", s.sample_interval_s)?;
        check_non_negative("synth.one_over_f_corner_hz", s.one_over_f_corner_hz)?;
        check_non_negative("synth.artifact_duration_s", s.artifact_duration_s)?;
        if !s.artifact_amplitude_v.is_finite() {
            return Err(CliError::config("synth.artifact_amplitude_v", "must be finite"));
        }
        check_non_negative("synth.voltage_scale", s.voltage_scale)?;
        if s.shots == 0 {
            return Err(CliError::config("synth.shots", "must be at least 1"));
        }
        let injected_signal_v = match &s.injected_signal_file {
            Some(path) => Some(read_trace_file(path)?.voltages_v),
            None => None,
        };
        let synth = SynthConfig {
            sample_interval_s: s.sample_interval_s,
            duration_s: p.trace_length_s,
            seed: s.seed,
            one_over_f_corner_hz: s.one_over_f_corner_hz,
            artifact_duration_s: s.artifact_duration_s,
            artifact_amplitude_v: s.artifact_amplitude_v,
            injected_signal_v,
            voltage_scale: s.voltage_scale,
        };
        synth.validate().key("synth")?;

        let a = &self.analysis;
        check_non_negative("analysis.boxcar_width_s", a.boxcar_width_s)?;
        check_non_negative("analysis.exclude_before_s", a.exclude_before_s)?;
        check_positive("analysis.fit_span_s", a.fit_span_s)?;
        check_positive("analysis.reference_offset_s", a.reference_offset_s)?;
        check_non_negative("analysis.band_low_hz", a.band_low_hz)?;
        check_positive("analysis.band_high_hz", a.band_high_hz)?;
        if a.band_high_hz <= a.band_low_hz {
            return Err(CliError::config("analysis.band_high_hz", "must exceed band_low_hz"));
        }
        if a.window_samples == 0 {
            return Err(CliError::config("analysis.window_samples", "must be at least 1"));
        }
        if a.psd_segment_samples < 2 {
            return Err(CliError::config("analysis.psd_segment_samples", "must be at least 2"));
        }
        let analysis = AnalysisConfig {
            extraction: (a.boxcar_width_s > 0.0).then_some(NoiseExtractionConfig {
                boxcar_width_s: a.boxcar_width_s,
            }),
            window_samples: a.window_samples,
            exclude_before_s: a.exclude_before_s,
            fit_span_s: a.fit_span_s,
            reference_offset_s: a.reference_offset_s,
            psd_segment_samples: a.psd_segment_samples,
            band_hz: (a.band_low_hz, a.band_high_hz),
        };
        analysis.validate().key("analysis")?;

        self.sweep.validate()?;

        Ok(Resolved {
            experiment: WarmupExperiment {
                mode,
                baths,
                cooling: PortSet::from_indices(&cooling).key("port")?,
                monitoring: PortSet::from_indices(&monitoring).key("port")?,
                chain,
                timing,
                synth,
                analysis,
            },
            port_names: self.ports.iter().map(|p| p.name.clone()).collect(),
            shots: s.shots,
            sweep: self.sweep.clone(),
            digest: self.digest(),
        })
    }
}

/// Pulls the field name out of serde's "unknown field `x`" message.
fn unknown_key(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Names the line of the offending span when no key is reported.
fn locate(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let start = r.start.min(text.len());
            let line = text[..start].matches('\n').count() + 1;
            let content = text.lines().nth(line - 1).unwrap_or("").trim();
            match content.split_once('=') {
                Some((k, _)) => format!("{} (line {line})", k.trim()),
                None => format!("line {line}"),
            }
        }
        None => "<document>".into(),
    }
}
