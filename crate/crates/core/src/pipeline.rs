//! The warm-up experiment end to end: cool, disconnect, record, analyze.
//!
//! [`WarmupExperiment`] bundles the physical setup with synthesis and
//! analysis settings. [`WarmupExperiment::simulate`] runs the dynamics;
//! [`analyze_traces`] applies the analysis chain to stored traces, and
//! [`ResidualPowerAccumulator`] computes the same per-sample residual power
//! from streamed shots without holding them in memory.

use crate::analysis::fit::fit_deltap_series;
use crate::analysis::{
    band_averaged_deltap, cooling_depth_from_fit, extract_noise_samples, spectral_density,
    subtract_mean_artifact, windowed_deltap_from_power, BandDeltaP, BiExpFit, CoolingDepth,
    DeltaPPoint, NoiseExtractionConfig, PowerSpectrum,
};
use crate::dynamics::{
    build_protocol, evolve_occupancy, relaxation_rate, EventLabel, PhotonTrajectory, PortSet,
    ProtocolTiming, SwitchSchedule, TimeGrid,
};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::exec::Execution;
use crate::noise::{mode_temperature, BathPort, BathSet, CavityMode, LossModel};
use crate::receiver::{infer_mode_temperature, noise_power_reduction_db, ReceiverChain};
use crate::synth::{shot_seed, NoiseTrace, SynthConfig, SynthPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// `None` skips boxcar noise extraction.
    pub extraction: Option<NoiseExtractionConfig>,
    pub window_samples: usize,
    pub exclude_before_s: f64,
    /// Length of the post-disconnect section that is fitted.
    pub fit_span_s: f64,
    /// Start of the ambient reference, measured from the disconnect; the
    /// reference runs to the end of the trace.
    pub reference_offset_s: f64,
    pub psd_segment_samples: usize,
    pub band_hz: (f64, f64),
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            extraction: Some(NoiseExtractionConfig {
                boxcar_width_s: 10e-6,
            }),
            window_samples: 10,
            exclude_before_s: 2e-6,
            fit_span_s: 60e-6,
            reference_offset_s: 70e-6,
            psd_segment_samples: 256,
            band_hz: (5e6, 10e6),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_samples == 0 {
            return Err(Error::domain("window must hold at least one sample"));
        }
        ensure_non_negative("exclusion", self.exclude_before_s)?;
        ensure_positive("fit span", self.fit_span_s)?;
        ensure_positive("reference offset", self.reference_offset_s)?;
        if self.psd_segment_samples < 2 {
            return Err(Error::domain("PSD segments need at least two samples"));
        }
        Ok(())
    }

    fn boxcar_samples(&self, sample_interval_s: f64) -> Result<Option<usize>> {
        match &self.extraction {
            None => Ok(None),
            Some(cfg) => {
                let w = cfg.width_samples(sample_interval_s)?;
                if w < 2 {
                    return Err(Error::domain(
                        "a boxcar narrower than two samples removes the whole signal",
                    ));
                }
                Ok(Some(w))
            }
        }
    }
}

/// Physical setup plus synthesis and analysis settings.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmupExperiment {
    pub mode: CavityMode,
    pub baths: BathSet,
    pub cooling: PortSet,
    pub monitoring: PortSet,
    pub chain: ReceiverChain,
    pub timing: ProtocolTiming,
    /// `duration_s` is replaced by `timing.trace_length_s`.
    pub synth: SynthConfig,
    pub analysis: AnalysisConfig,
}

impl WarmupExperiment {
    /// The bench setup: 1.4495 GHz mode with `Q0 = 164 000` at 290 K,
    /// cooling port `κ = 3.8` behind 0.19 dB and monitoring port `κ = 1`
    /// behind 6.05 dB, both loads at 18.4 K; the bench receiver; 40 µs of
    /// cooling in a 140 µs record at 100 ns.
    pub fn bench_reference() -> Self {
        let baths = BathSet::new(
            290.0,
            vec![
                BathPort::new(3.8, 18.4, 0.19, 290.0, LossModel::Linear).expect("valid port"),
                BathPort::new(1.0, 18.4, 6.05, 290.0, LossModel::Exact).expect("valid port"),
            ],
        )
        .expect("valid baths");
        WarmupExperiment {
            mode: CavityMode::new(1.4495e9, 164_000.0).expect("valid mode"),
            baths,
            cooling: PortSet::from_indices(&[0]).expect("index"),
            monitoring: PortSet::from_indices(&[1]).expect("index"),
            chain: ReceiverChain::bench_reference(),
            timing: ProtocolTiming {
                cool_duration_s: 40e-6,
                interrogate_delay_s: 0.0,
                trace_length_s: 140e-6,
            },
            synth: SynthConfig {
                artifact_amplitude_v: 500.0,
                ..SynthConfig::default()
            },
            analysis: AnalysisConfig::default(),
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            duration_s: self.timing.trace_length_s,
            ..self.synth.clone()
        }
    }

    pub fn ambient_temperature_k(&self) -> Result<f64> {
        let m = self.monitoring;
        mode_temperature(&self.baths.subset(|i| m.contains(i)))
    }

    pub fn cooled_temperature_k(&self) -> Result<f64> {
        let active = self.cooling.union(self.monitoring);
        mode_temperature(&self.baths.subset(|i| active.contains(i)))
    }

    /// ΔP the receiver would show between the cooled and ambient steady
    /// states.
    pub fn steady_deltap_db(&self) -> Result<f64> {
        Ok(noise_power_reduction_db(
            self.cooled_temperature_k()?,
            self.ambient_temperature_k()?,
            &self.chain,
        ))
    }

    /// Time constant of the warm-up after the disconnect.
    pub fn warm_up_time_s(&self) -> f64 {
        1.0 / relaxation_rate(&self.mode, &self.baths, self.monitoring)
    }

    pub fn schedule(&self) -> Result<SwitchSchedule> {
        build_protocol(&self.timing, self.cooling, self.monitoring)
    }

    /// Runs the dynamics from the ambient steady state. The step is the
    /// largest integer fraction of the sample interval that resolves the
    /// fastest relaxation.
    pub fn simulate(&self) -> Result<Simulation> {
        let schedule = self.schedule()?;
        let fastest = schedule
            .events()
            .iter()
            .map(|e| relaxation_rate(&self.mode, &self.baths, e.active))
            .fold(0.0, f64::max);
        let dt_sample = self.synth.sample_interval_s;
        ensure_positive("sample interval", dt_sample)?;
        let substeps = (dt_sample * fastest * 10.0).ceil().max(1.0);
        let grid = TimeGrid {
            t_end_s: self.timing.trace_length_s,
            dt_s: dt_sample / substeps,
        };
        let q0 = self.mode.epsilon() * self.ambient_temperature_k()?;
        let trajectory = evolve_occupancy(&self.mode, &self.baths, &schedule, &grid, q0)?;
        Ok(Simulation {
            schedule,
            trajectory,
        })
    }

    pub fn plan(&self, sim: &Simulation) -> Result<SynthPlan> {
        SynthPlan::new(
            &sim.trajectory,
            &self.chain,
            &self.synth_config(),
            &sim.disconnect_times_s(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub schedule: SwitchSchedule,
    pub trajectory: PhotonTrajectory,
}

impl Simulation {
    pub fn disconnect_times_s(&self) -> Vec<f64> {
        self.schedule.times_of(EventLabel::Disconnect)
    }
}

/// Everything the analysis chain reports. Absent entries could not be
/// computed for the given data (e.g. a band above Nyquist).
#[derive(Debug, Clone, PartialEq)]
pub struct WarmupAnalysis {
    pub shots: usize,
    /// Window centres measured from the disconnect.
    pub series: Vec<DeltaPPoint>,
    pub fit: std::result::Result<BiExpFit, Error>,
    pub depth: Option<CoolingDepth>,
    /// Second half of the cooling section against the reference.
    pub pre_disconnect_deltap_db: Option<f64>,
    pub psd_cold: Option<PowerSpectrum>,
    pub psd_ambient: Option<PowerSpectrum>,
    pub band: std::result::Result<BandDeltaP, Error>,
}

impl WarmupAnalysis {
    /// Mode temperature implied by the fitted depth (or, failing that, by
    /// the pre-disconnect level).
    pub fn inferred_mode_temperature_k(&self, t_ambient_k: f64, chain: &ReceiverChain) -> Result<f64> {
        let dp = self
            .depth
            .map(|d| d.delta_p_db)
            .or(self.pre_disconnect_deltap_db)
            .ok_or_else(|| Error::domain("no ΔP estimate available"))?;
        infer_mode_temperature(dp, t_ambient_k, chain)
    }
}

/// Index of the first sample at or after `t_s` on a grid starting at 0.
fn sample_index(t_s: f64, dt: f64) -> usize {
    ((t_s / dt) - 1e-9).ceil().max(0.0) as usize
}

/// Windowed `ΔP` series, its fit, and the pre-disconnect level.
pub type ProfileAnalysis = (Vec<DeltaPPoint>, std::result::Result<BiExpFit, Error>, Option<f64>);

/// Windowed series and fit from a per-sample residual power profile.
pub fn analyze_power_profile(
    power: &[f64],
    sample_interval_s: f64,
    disconnect_s: f64,
    cfg: &AnalysisConfig,
) -> Result<ProfileAnalysis> {
    cfg.validate()?;
    let d = sample_index(disconnect_s, sample_interval_s);
    let cold_end = (d + (cfg.fit_span_s / sample_interval_s).round() as usize).min(power.len());
    let ref_start = d + sample_index(cfg.reference_offset_s, sample_interval_s);
    if d >= power.len() || ref_start >= power.len() {
        return Err(Error::domain(format!(
            "trace of {} samples ends before the reference section (sample {ref_start})",
            power.len()
        )));
    }
    let reference = &power[ref_start..];
    let series = windowed_deltap_from_power(&power[d..cold_end], reference, cfg.window_samples, sample_interval_s)?;
    let fit = fit_deltap_series(&series, cfg.exclude_before_s);

    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let pre = &power[d / 2..d];
    let ref_mean = mean(reference);
    let pre_disconnect = if !pre.is_empty() && ref_mean > 0.0 && mean(pre) > 0.0 {
        Some(10.0 * (mean(pre) / ref_mean).log10())
    } else {
        None
    };
    Ok((series, fit, pre_disconnect))
}

fn residual(x: &[f64], boxcar: Option<usize>) -> Vec<f64> {
    match boxcar {
        Some(w) => extract_noise_samples(x, w),
        None => x.to_vec(),
    }
}

/// Full chain on stored traces: ensemble-mean subtraction (when there are
/// at least two), boxcar extraction, windowed ΔP and fit, and Welch
/// spectra of the late cooling section and the reference.
pub fn analyze_traces(
    traces: &[NoiseTrace],
    disconnect_s: f64,
    cfg: &AnalysisConfig,
    exec: Execution,
) -> Result<WarmupAnalysis> {
    let first = traces
        .first()
        .ok_or_else(|| Error::domain("no traces to analyze"))?;
    let dt = first.sample_interval_s;
    let boxcar = cfg.boxcar_samples(dt)?;
    if let Some(w) = boxcar {
        if w > first.len() {
            return Err(Error::domain("boxcar is longer than the trace"));
        }
    }
    let centred = if traces.len() >= 2 {
        subtract_mean_artifact(traces)?
    } else {
        log::warn!("single trace: the switching artifact cannot be removed by averaging");
        traces.to_vec()
    };
    let residuals: Vec<Vec<f64>> = exec.map_slice(&centred, |t| residual(&t.voltages_v, boxcar));

    let n = residuals.len() as f64;
    let mut power = vec![0.0; first.len()];
    for r in &residuals {
        for (p, v) in power.iter_mut().zip(r) {
            *p += v * v / n;
        }
    }
    let t_rel = disconnect_s - first.start_s;
    let (series, fit, pre_disconnect) = analyze_power_profile(&power, dt, t_rel, cfg)?;
    let depth = fit.as_ref().ok().and_then(|f| cooling_depth_from_fit(f).ok());

    let d = sample_index(t_rel, dt);
    let ref_start = d + sample_index(cfg.reference_offset_s, dt);
    let seg = cfg.psd_segment_samples;
    let spectra = |range: std::ops::Range<usize>| -> Option<PowerSpectrum> {
        if range.len() < seg {
            return None;
        }
        let each: Vec<PowerSpectrum> = exec
            .map_slice(&residuals, |r| spectral_density(&r[range.clone()], dt, seg))
            .into_iter()
            .collect::<Result<_>>()
            .ok()?;
        PowerSpectrum::average(&each).ok()
    };
    let psd_cold = spectra(d / 2..d);
    let psd_ambient = spectra(ref_start..first.len());
    let band = match (&psd_cold, &psd_ambient) {
        (Some(c), Some(a)) => band_averaged_deltap(c, a, cfg.band_hz),
        _ => Err(Error::domain(format!(
            "cooling or reference section is shorter than one {seg}-sample PSD segment"
        ))),
    };

    Ok(WarmupAnalysis {
        shots: traces.len(),
        series,
        fit,
        depth,
        pre_disconnect_deltap_db: pre_disconnect,
        psd_cold,
        psd_ambient,
        band,
    })
}

/// Running per-sample sums of the boxcar residual `y` and `y²` over shots.
///
/// `mean(y²) − mean(y)²` equals the mean square after subtracting the
/// ensemble mean, because the boxcar residual is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPowerAccumulator {
    shots: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl ResidualPowerAccumulator {
    pub fn new(samples: usize) -> Self {
        ResidualPowerAccumulator {
            shots: 0,
            sum: vec![0.0; samples],
            sum_sq: vec![0.0; samples],
        }
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn add(&mut self, residual: &[f64]) {
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(residual) {
            *s += v;
            *q += v * v;
        }
        self.shots += 1;
    }

    pub fn merge(&mut self, other: &ResidualPowerAccumulator) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.shots += other.shots;
    }

    /// Per-sample mean square about the ensemble mean.
    pub fn power(&self) -> Vec<f64> {
        let n = self.shots as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| (q / n - (s / n).powi(2)).max(0.0))
            .collect()
    }
}

const SHOTS_PER_BLOCK: usize = 256;

/// Streams `n_shots` shots of `plan` (seeds from `master_seed`) into a
/// residual-power accumulator. Shots are grouped in fixed blocks merged in
/// order, so the result does not depend on the execution mode.
pub fn accumulate_residual_power(
    plan: &SynthPlan,
    n_shots: usize,
    master_seed: u64,
    boxcar: Option<usize>,
    exec: Execution,
) -> ResidualPowerAccumulator {
    let n = plan.sample_count();
    let blocks = n_shots.div_ceil(SHOTS_PER_BLOCK);
    let partials = exec.map_indexed(blocks, |b| {
        let mut acc = ResidualPowerAccumulator::new(n);
        let mut buf = vec![0.0; n];
        let start = b * SHOTS_PER_BLOCK;
        for i in start..(start + SHOTS_PER_BLOCK).min(n_shots) {
            plan.fill(shot_seed(master_seed, i as u64), &mut buf);
            match boxcar {
                Some(w) => acc.add(&extract_noise_samples(&buf, w)),
                None => acc.add(&buf),
            }
        }
        acc
    });
    let mut total = ResidualPowerAccumulator::new(n);
    for p in &partials {
        total.merge(p);
    }
    total
}

/// Recovered warm-up parameters from one streamed run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureOutcome {
    pub fit: std::result::Result<BiExpFit, Error>,
    pub depth: Option<CoolingDepth>,
    pub pre_disconnect_deltap_db: Option<f64>,
}

impl ClosureOutcome {
    pub fn warm_up_time_s(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.tau2_s)
    }
}

/// Repeated simulate→analyze runs sharing one dynamics solution and
/// synthesis plan.
#[derive(Debug, Clone)]
pub struct ClosureRunner {
    plan: SynthPlan,
    analysis: AnalysisConfig,
    sample_interval_s: f64,
    disconnect_s: f64,
    boxcar: Option<usize>,
}

impl ClosureRunner {
    pub fn new(experiment: &WarmupExperiment) -> Result<Self> {
        let sim = experiment.simulate()?;
        let disconnect_s = *sim
            .disconnect_times_s()
            .first()
            .ok_or_else(|| Error::domain("the protocol never disconnects the cooling ports"))?;
        let dt = experiment.synth.sample_interval_s;
        Ok(ClosureRunner {
            plan: experiment.plan(&sim)?,
            analysis: experiment.analysis.clone(),
            sample_interval_s: dt,
            disconnect_s,
            boxcar: experiment.analysis.boxcar_samples(dt)?,
        })
    }

    pub fn run(&self, master_seed: u64, n_shots: usize, exec: Execution) -> Result<ClosureOutcome> {
        if n_shots < 2 {
            return Err(Error::domain("a closure run needs at least two shots"));
        }
        let acc = accumulate_residual_power(&self.plan, n_shots, master_seed, self.boxcar, exec);
        let (_, fit, pre) =
            analyze_power_profile(&acc.power(), self.sample_interval_s, self.disconnect_s, &self.analysis)?;
        let depth = fit.as_ref().ok().and_then(|f| cooling_depth_from_fit(f).ok());
        Ok(ClosureOutcome {
            fit,
            depth,
            pre_disconnect_deltap_db: pre,
        })
    }
}
