//! Recovering cooling depth and warm-up dynamics from voltage traces.
//!
//! The chain is: subtract the ensemble mean (removes the switching artifact
//! and any other shot-independent waveform), remove slow drifts with a
//! boxcar high-pass, then compare mean-square voltages of a cold section
//! against an ambient reference, either per short time window
//! ([`windowed_deltap_timeseries`]) or per frequency band
//! ([`psd::band_averaged_deltap`]). The windowed series is fitted with a
//! bi-exponential ([`fit::fit_biexponential`]).

pub mod fit;
pub mod psd;

use crate::error::{Error, Result};
use crate::synth::NoiseTrace;

pub use fit::{cooling_depth_from_fit, fit_biexponential, BiExpFit, CoolingDepth};
pub use psd::{band_averaged_deltap, spectral_density, BandDeltaP, PowerSpectrum};

/// Subtracts the per-sample ensemble mean from every trace.
pub fn subtract_mean_artifact(traces: &[NoiseTrace]) -> Result<Vec<NoiseTrace>> {
    if traces.len() < 2 {
        return Err(Error::domain("artifact subtraction needs at least two traces"));
    }
    let first = &traces[0];
    if let Some(bad) = traces.iter().position(|t| !t.same_grid(first)) {
        return Err(Error::domain(format!(
            "trace {bad} is not on the same time grid as trace 0"
        )));
    }
    let n = traces.len() as f64;
    let mut mean = vec![0.0; first.len()];
    for t in traces {
        for (m, v) in mean.iter_mut().zip(&t.voltages_v) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(traces
        .iter()
        .map(|t| {
            let mut out = t.clone();
            for (v, m) in out.voltages_v.iter_mut().zip(&mean) {
                *v -= m;
            }
            out
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseExtractionConfig {
    pub boxcar_width_s: f64,
}

impl Default for NoiseExtractionConfig {
    fn default() -> Self {
        NoiseExtractionConfig {
            boxcar_width_s: 100e-9,
        }
    }
}

impl NoiseExtractionConfig {
    /// Width in samples, rounded to the nearest whole sample.
    pub fn width_samples(&self, sample_interval_s: f64) -> Result<usize> {
        let w = (self.boxcar_width_s / sample_interval_s).round();
        if !(w >= 1.0) {
            return Err(Error::domain(format!(
                "boxcar width {} s is shorter than the sample interval {} s",
                self.boxcar_width_s, sample_interval_s
            )));
        }
        Ok(w as usize)
    }
}

/// Centred moving average over `width` samples. Near the ends the window is
/// truncated to the samples that exist, so the output is always an average
/// of real data.
pub fn boxcar_smooth(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 || width <= 1 {
        return x.to_vec();
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(before);
            let hi = (k + after + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// `x − boxcar_smooth(x, width)`.
pub fn extract_noise_samples(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return vec![0.0; x.len()];
    }
    let smooth = boxcar_smooth(x, width);
    x.iter().zip(&smooth).map(|(a, b)| a - b).collect()
}

pub fn extract_noise(trace: &NoiseTrace, cfg: &NoiseExtractionConfig) -> Result<NoiseTrace> {
    let width = cfg.width_samples(trace.sample_interval_s)?;
    if width > trace.len() {
        return Err(Error::domain(format!(
            "boxcar of {width} samples does not fit in a trace of {} samples",
            trace.len()
        )));
    }
    Ok(NoiseTrace {
        voltages_v: extract_noise_samples(&trace.voltages_v, width),
        ..trace.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPPoint {
    /// Centre of the window, relative to the start of the cold section.
    pub time_s: f64,
    /// `None` when the window or the reference has zero power.
    pub delta_p_db: Option<f64>,
}

/// Windowed ΔP from per-sample powers (squared voltages, or their ensemble
/// averages). Consecutive non-overlapping windows of `window` samples.
pub fn windowed_deltap_from_power(
    cold_power: &[f64],
    reference_power: &[f64],
    window: usize,
    sample_interval_s: f64,
) -> Result<Vec<DeltaPPoint>> {
    if window == 0 {
        return Err(Error::domain("window must hold at least one sample"));
    }
    if cold_power.len() < window || reference_power.is_empty() {
        return Err(Error::domain(format!(
            "sections too short: {} cold samples, {} reference samples, window {window}",
            cold_power.len(),
            reference_power.len()
        )));
    }
    let reference = reference_power.iter().sum::<f64>() / reference_power.len() as f64;
    Ok(cold_power
        .chunks_exact(window)
        .enumerate()
        .map(|(j, chunk)| {
            let power = chunk.iter().sum::<f64>() / window as f64;
            let delta_p_db = if power > 0.0 && reference > 0.0 {
                Some(10.0 * (power / reference).log10())
            } else {
                None
            };
            DeltaPPoint {
                time_s: (j * window) as f64 * sample_interval_s
                    + 0.5 * (window - 1) as f64 * sample_interval_s,
                delta_p_db,
            }
        })
        .collect())
}

/// Windowed ΔP of a cold voltage section against an ambient reference.
pub fn windowed_deltap_timeseries(
    cold_v: &[f64],
    reference_v: &[f64],
    window: usize,
    sample_interval_s: f64,
) -> Result<Vec<DeltaPPoint>> {
    let sq = |x: &[f64]| x.iter().map(|v| v * v).collect::<Vec<_>>();
    windowed_deltap_from_power(&sq(cold_v), &sq(reference_v), window, sample_interval_s)
}
