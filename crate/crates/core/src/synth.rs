//! Synthetic receiver voltage traces.
//!
//! Each sample is `σ(t)·(w + p) + artifact + injected`, where
//! `σ(t)² = scale²·output_noise(T_mode(t))`, `w` is unit white Gaussian
//! noise and `p` an optional unit 1/f process. Scaling the 1/f part by the
//! same envelope keeps the cooled/ambient power ratio independent of the
//! corner frequency.
//!
//! # Random streams
//!
//! Every trace owns a [`ChaCha8Rng`] seeded from a single `u64`: the 32-byte
//! key is four successive splitmix64 outputs of that seed, little-endian.
//! White noise uses stream 0 and the 1/f sources stream 1. Shot `i` of an
//! ensemble with master seed `m` uses the seed
//! `splitmix64_mix(m + (i + 1)·0x9E3779B97F4A7C15)` ([`shot_seed`]).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::dynamics::PhotonTrajectory;
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::exec::Execution;
use crate::receiver::ReceiverChain;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizer of the splitmix64 generator.
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of shot `index` in an ensemble with master seed `master`.
pub fn shot_seed(master: u64, index: u64) -> u64 {
    splitmix64_mix(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// ChaCha8 generator keyed from a 64-bit seed via splitmix64.
pub fn trace_rng(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&splitmix64_mix(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sample_interval_s: f64,
    pub duration_s: f64,
    pub seed: u64,
    /// Frequency where the 1/f density equals the white floor; 0 disables it.
    pub one_over_f_corner_hz: f64,
    pub artifact_duration_s: f64,
    pub artifact_amplitude_v: f64,
    /// Added sample by sample from `t = 0`; shorter than the trace is fine.
    pub injected_signal_v: Option<Vec<f64>>,
    /// Volts per √kelvin.
    pub voltage_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_interval_s: 100e-9,
            duration_s: 140e-6,
            seed: 0,
            one_over_f_corner_hz: 1e6,
            artifact_duration_s: 2e-6,
            artifact_amplitude_v: 0.0,
            injected_signal_v: None,
            voltage_scale: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("sample interval", self.sample_interval_s)?;
        ensure_positive("duration", self.duration_s)?;
        if self.duration_s < 10.0 * self.sample_interval_s * (1.0 - 1e-12) {
            return Err(Error::domain("duration must cover at least 10 samples"));
        }
        ensure_non_negative("1/f corner", self.one_over_f_corner_hz)?;
        ensure_non_negative("artifact duration", self.artifact_duration_s)?;
        if self.artifact_duration_s >= self.duration_s {
            return Err(Error::domain("artifact must be shorter than the trace"));
        }
        if !self.artifact_amplitude_v.is_finite() {
            return Err(Error::domain("artifact amplitude must be finite"));
        }
        ensure_non_negative("voltage scale", self.voltage_scale)?;
        if let Some(sig) = &self.injected_signal_v {
            if sig.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("injected signal must be finite"));
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s / self.sample_interval_s).round() as usize
    }

    /// SHA-256 over a canonical text form of every field except the seed.
    pub fn digest(&self) -> String {
        let mut text = format!(
            "sample_interval_s={:e}\nduration_s={:e}\none_over_f_corner_hz={:e}\n\
             artifact_duration_s={:e}\nartifact_amplitude_v={:e}\nvoltage_scale={:e}\n",
            self.sample_interval_s,
            self.duration_s,
            self.one_over_f_corner_hz,
            self.artifact_duration_s,
            self.artifact_amplitude_v,
            self.voltage_scale,
        );
        if let Some(sig) = &self.injected_signal_v {
            text.push_str("injected_signal_v=");
            for v in sig {
                text.push_str(&format!("{v:e},"));
            }
            text.push('\n');
        }
        hex(&Sha256::digest(text.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMetadata {
    pub seed: u64,
    pub shot_index: Option<u64>,
    pub config_digest: String,
    /// Instants where the cooling ports were disconnected.
    pub disconnect_times_s: Vec<f64>,
}

/// Uniformly sampled voltage record; sample `k` is at `start_s + k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    pub start_s: f64,
    pub sample_interval_s: f64,
    pub voltages_v: Vec<f64>,
    pub metadata: TraceMetadata,
}

impl NoiseTrace {
    pub fn len(&self) -> usize {
        self.voltages_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltages_v.is_empty()
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.start_s + k as f64 * self.sample_interval_s
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t - self.start_s) / self.sample_interval_s - 1e-9).ceil();
        (k.max(0.0) as usize).min(self.len())
    }

    pub fn same_grid(&self, other: &NoiseTrace) -> bool {
        self.len() == other.len()
            && self.start_s == other.start_s
            && self.sample_interval_s == other.sample_interval_s
    }
}

/// Octave-spaced first-order sources whose summed density is
/// `2·dt·f_c/f` in the band they span, so it meets the unit white floor
/// (`2·dt`) at the corner.
#[derive(Debug, Clone)]
pub struct PinkNoiseModel {
    poles: Vec<f64>,
    gains: Vec<f64>,
    stationary_sd: f64,
}

impl PinkNoiseModel {
    pub fn new(corner_hz: f64, sample_interval_s: f64) -> Result<Self> {
        ensure_positive("1/f corner", corner_hz)?;
        ensure_positive("sample interval", sample_interval_s)?;
        let top = 0.25 / sample_interval_s;
        let mut pole_hz = corner_hz / 4096.0;
        let mut poles = Vec::new();
        while pole_hz <= top {
            poles.push((-2.0 * PI * pole_hz * sample_interval_s).exp());
            pole_hz *= 2.0;
        }
        if poles.is_empty() {
            return Err(Error::domain("1/f corner is above the usable bandwidth"));
        }
        // Equal stationary variance g per source; solve for g so that the
        // exact discrete density equals 2·dt at the corner.
        let w = 2.0 * PI * corner_hz * sample_interval_s;
        let shape: f64 = poles
            .iter()
            .map(|&a| (1.0 - a * a) / (1.0 - 2.0 * a * w.cos() + a * a))
            .sum();
        let variance = 1.0 / shape;
        let gains = poles.iter().map(|&a| (variance * (1.0 - a * a)).sqrt()).collect();
        Ok(PinkNoiseModel {
            poles,
            gains,
            stationary_sd: variance.sqrt(),
        })
    }

    /// One-sided density of the unit process at `f`, in units where unit
    /// white noise has density `2·dt`.
    pub fn density(&self, f_hz: f64, sample_interval_s: f64) -> f64 {
        let w = 2.0 * PI * f_hz * sample_interval_s;
        self.poles
            .iter()
            .zip(&self.gains)
            .map(|(&a, &b)| 2.0 * sample_interval_s * b * b / (1.0 - 2.0 * a * w.cos() + a * a))
            .sum()
    }

    /// Adds `n` samples of the process, started from its stationary state,
    /// into `out`.
    fn add_to(&self, out: &mut [f64], rng: &mut ChaCha8Rng) {
        for (&a, &b) in self.poles.iter().zip(&self.gains) {
            let mut x = self.stationary_sd * rng.sample::<f64, _>(StandardNormal);
            for v in out.iter_mut() {
                *v += x;
                x = a * x + b * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
}

/// Deterministic switching transient: `A·(1 − u)·sin(8πu)` for
/// `u = (t − t_switch)/duration ∈ [0, 1)`.
pub fn artifact_waveform(amplitude_v: f64, elapsed_s: f64, duration_s: f64) -> f64 {
    if duration_s <= 0.0 || !(0.0..duration_s).contains(&elapsed_s) {
        return 0.0;
    }
    let u = elapsed_s / duration_s;
    amplitude_v * (1.0 - u) * (8.0 * PI * u).sin()
}

/// Adds the switching transient at every disconnect time recorded in the
/// trace metadata.
pub fn inject_switch_artifact(trace: &mut NoiseTrace, cfg: &SynthConfig) {
    if cfg.artifact_amplitude_v == 0.0 {
        return;
    }
    let times = trace.metadata.disconnect_times_s.clone();
    for t_switch in times {
        let first = trace.index_at(t_switch);
        for k in first..trace.len() {
            let elapsed = trace.time_at(k) - t_switch;
            if elapsed >= cfg.artifact_duration_s {
                break;
            }
            trace.voltages_v[k] +=
                artifact_waveform(cfg.artifact_amplitude_v, elapsed, cfg.artifact_duration_s);
        }
    }
}

/// Shot-independent pieces of a synthesis run: noise envelope, 1/f model
/// and the deterministic waveform (artifact plus injected signal).
#[derive(Debug, Clone)]
pub struct SynthPlan {
    cfg: SynthConfig,
    envelope: Vec<f64>,
    deterministic: Vec<f64>,
    pink: Option<PinkNoiseModel>,
    digest: String,
    disconnect_times_s: Vec<f64>,
}

impl SynthPlan {
    pub fn new(
        trajectory: &PhotonTrajectory,
        chain: &ReceiverChain,
        cfg: &SynthConfig,
        disconnect_times_s: &[f64],
    ) -> Result<Self> {
        cfg.validate()?;
        chain.validate()?;
        let n = cfg.sample_count();
        let last = (n - 1) as f64 * cfg.sample_interval_s;
        if trajectory.is_empty() || trajectory.end_s() < last * (1.0 - 1e-9) {
            return Err(Error::domain(format!(
                "trajectory ends at {} s but the trace needs {} s",
                trajectory.end_s(),
                last
            )));
        }
        let envelope = (0..n)
            .map(|k| {
                let t_mode = trajectory.temperature_at(k as f64 * cfg.sample_interval_s);
                cfg.voltage_scale * chain.output_noise(t_mode).sqrt()
            })
            .collect();
        let pink = if cfg.one_over_f_corner_hz > 0.0 {
            Some(PinkNoiseModel::new(cfg.one_over_f_corner_hz, cfg.sample_interval_s)?)
        } else {
            None
        };

        let mut template = NoiseTrace {
            start_s: 0.0,
            sample_interval_s: cfg.sample_interval_s,
            voltages_v: vec![0.0; n],
            metadata: TraceMetadata {
                disconnect_times_s: disconnect_times_s.to_vec(),
                ..TraceMetadata::default()
            },
        };
        if let Some(sig) = &cfg.injected_signal_v {
            for (v, s) in template.voltages_v.iter_mut().zip(sig) {
                *v += s;
            }
        }
        inject_switch_artifact(&mut template, cfg);

        Ok(SynthPlan {
            cfg: cfg.clone(),
            envelope,
            deterministic: template.voltages_v,
            pink,
            digest: cfg.digest(),
            disconnect_times_s: disconnect_times_s.to_vec(),
        })
    }

    pub fn sample_count(&self) -> usize {
        self.envelope.len()
    }

    /// Noise standard deviation per sample.
    pub fn envelope(&self) -> &[f64] {
        &self.envelope
    }

    /// Writes the voltages of the trace with `seed` into `out`.
    pub fn fill(&self, seed: u64, out: &mut [f64]) {
        assert_eq!(out.len(), self.envelope.len());
        let mut rng = trace_rng(seed);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if let Some(pink) = &self.pink {
            rng.set_stream(1);
            pink.add_to(out, &mut rng);
        }
        for ((v, sd), d) in out.iter_mut().zip(&self.envelope).zip(&self.deterministic) {
            *v = *v * sd + d;
        }
    }

    pub fn trace(&self, seed: u64, shot_index: Option<u64>) -> NoiseTrace {
        let mut voltages_v = vec![0.0; self.envelope.len()];
        self.fill(seed, &mut voltages_v);
        NoiseTrace {
            start_s: 0.0,
            sample_interval_s: self.cfg.sample_interval_s,
            voltages_v,
            metadata: TraceMetadata {
                seed,
                shot_index,
                config_digest: self.digest.clone(),
                disconnect_times_s: self.disconnect_times_s.clone(),
            },
        }
    }
}

/// One trace following `trajectory`, including the switch artifact at
/// `disconnect_times_s` and any injected signal. Same inputs give
/// bit-identical output.
pub fn synthesize_trace(
    trajectory: &PhotonTrajectory,
    chain: &ReceiverChain,
    cfg: &SynthConfig,
    disconnect_times_s: &[f64],
) -> Result<NoiseTrace> {
    Ok(SynthPlan::new(trajectory, chain, cfg, disconnect_times_s)?.trace(cfg.seed, None))
}

/// `n_shots` traces sharing the deterministic components; shot `i` uses
/// [`shot_seed`]`(cfg.seed, i)`.
pub fn synthesize_shot_ensemble(
    n_shots: usize,
    trajectory: &PhotonTrajectory,
    chain: &ReceiverChain,
    cfg: &SynthConfig,
    disconnect_times_s: &[f64],
    exec: Execution,
) -> Result<Vec<NoiseTrace>> {
    if n_shots == 0 {
        return Err(Error::domain("an ensemble needs at least one shot"));
    }
    let plan = SynthPlan::new(trajectory, chain, cfg, disconnect_times_s)?;
    Ok(exec.map_indexed(n_shots, |i| {
        plan.trace(shot_seed(cfg.seed, i as u64), Some(i as u64))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(t_k: f64, end_s: f64) -> PhotonTrajectory {
        PhotonTrajectory {
            times_s: vec![0.0, end_s],
            occupancy: vec![0.0, 0.0],
            temperature_k: vec![t_k, t_k],
        }
    }

    fn quiet_cfg(duration_s: f64) -> SynthConfig {
        SynthConfig {
            duration_s,
            one_over_f_corner_hz: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs of splitmix64 seeded with 0 and 1234567.
        let mut s = 0u64;
        let mut next = || {
            s = s.wrapping_add(GOLDEN_GAMMA);
            splitmix64_mix(s)
        };
        assert_eq!(next(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(next(), 0x6E78_9E6A_A1B9_65F4);
        let mut s = 1_234_567u64;
        s = s.wrapping_add(GOLDEN_GAMMA);
        assert_eq!(splitmix64_mix(s), 6_457_827_717_110_365_317);
    }

    #[test]
    fn shot_seeds_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|i| shot_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_eq!(seeds, (0..1000).map(|i| shot_seed(42, i)).collect::<Vec<_>>());
        assert_ne!(shot_seed(42, 0), shot_seed(43, 0));
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let cfg = SynthConfig { one_over_f_corner_hz: 1e6, ..SynthConfig::default() };
        let traj = flat(200.0, 140e-6);
        let c = ReceiverChain::bench_reference();
        let a = synthesize_trace(&traj, &c, &cfg, &[]).unwrap();
        let b = synthesize_trace(&traj, &c, &cfg, &[]).unwrap();
        assert_eq!(a, b);
        let other = synthesize_trace(&traj, &c, &SynthConfig { seed: 1, ..cfg }, &[]).unwrap();
        assert_ne!(a.voltages_v, other.voltages_v);
        assert_eq!(a.len(), 1400);
    }

    #[test]
    fn variance_matches_target() {
        let cfg = SynthConfig { seed: 7, sample_interval_s: 1e-7, ..quiet_cfg(0.1) };
        let c = ReceiverChain::bench_reference();
        let tr = synthesize_trace(&flat(108.1, 0.1), &c, &cfg, &[]).unwrap();
        assert_eq!(tr.len(), 1_000_000);
        let n = tr.len() as f64;
        let mean = tr.voltages_v.iter().sum::<f64>() / n;
        let var = tr.voltages_v.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = c.output_noise(108.1);
        assert!(((var - target) / target).abs() < 0.005, "{var} vs {target}");

        // Jarque-Bera statistic on the standardized samples
        let sd = var.sqrt();
        let (mut m3, mut m4) = (0.0, 0.0);
        for v in &tr.voltages_v {
            let z = (v - mean) / sd;
            m3 += z.powi(3);
            m4 += z.powi(4);
        }
        let skew = m3 / n;
        let kurt = m4 / n;
        let jb = n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
        // chi-squared(2) upper 1e-3 quantile
        assert!(jb < 13.8155, "JB = {jb}");
    }

    #[test]
    fn zero_scale_leaves_only_injected_signal() {
        let sig = vec![0.5, -0.25, 1.0];
        let cfg = SynthConfig {
            voltage_scale: 0.0,
            injected_signal_v: Some(sig.clone()),
            one_over_f_corner_hz: 1e6,
            ..quiet_cfg(3e-6)
        };
        let tr = synthesize_trace(&flat(100.0, 3e-6), &ReceiverChain::bench_reference(), &cfg, &[])
            .unwrap();
        assert_eq!(&tr.voltages_v[..3], &sig[..]);
        assert!(tr.voltages_v[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn segment_variance_ratio_matches_deltap() {
        let c = ReceiverChain::bench_reference();
        let traj = PhotonTrajectory {
            times_s: vec![0.0, 0.01, 0.01 + 1e-9, 0.02],
            occupancy: vec![0.0; 4],
            temperature_k: vec![108.1, 108.1, 255.4, 255.4],
        };
        let cfg = SynthConfig { seed: 3, ..quiet_cfg(0.02) };
        let tr = synthesize_trace(&traj, &c, &cfg, &[]).unwrap();
        let ms = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        let half = tr.len() / 2;
        let ratio = 10.0 * (ms(&tr.voltages_v[..half - 1]) / ms(&tr.voltages_v[half + 1..])).log10();
        assert!((ratio - -3.5).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn artifact_is_seed_independent() {
        let c = ReceiverChain::bench_reference();
        let traj = flat(250.0, 20e-6);
        let base = SynthConfig { artifact_amplitude_v: 50.0, ..quiet_cfg(20e-6) };
        let bare = SynthConfig { artifact_amplitude_v: 0.0, ..base.clone() };
        let mut parts = Vec::new();
        for seed in [11, 12] {
            let with = synthesize_trace(&traj, &c, &SynthConfig { seed, ..base.clone() }, &[5e-6]).unwrap();
            let without = synthesize_trace(&traj, &c, &SynthConfig { seed, ..bare.clone() }, &[5e-6]).unwrap();
            let d: Vec<f64> = with.voltages_v.iter().zip(&without.voltages_v).map(|(a, b)| a - b).collect();
            parts.push(d);
        }
        for (a, b) in parts[0].iter().zip(&parts[1]) {
            assert!((a - b).abs() < 1e-9);
        }
        // confined to [5 µs, 7 µs)
        let k = |t: f64| (t / 1e-7f64).round() as usize;
        assert!(parts[0][..k(5e-6)].iter().all(|v| v.abs() < 1e-9));
        assert!(parts[0][k(7e-6)..].iter().all(|v| v.abs() < 1e-9));
        assert!(parts[0][k(5e-6)..k(7e-6)].iter().any(|v| v.abs() > 1.0));
    }

    #[test]
    fn zero_amplitude_artifact_is_noop() {
        let c = ReceiverChain::bench_reference();
        let cfg = quiet_cfg(20e-6);
        let mut tr = synthesize_trace(&flat(250.0, 20e-6), &c, &cfg, &[5e-6]).unwrap();
        let before = tr.clone();
        inject_switch_artifact(&mut tr, &cfg);
        assert_eq!(tr, before);
    }

    #[test]
    fn ensemble_of_one_matches_single_trace() {
        let c = ReceiverChain::bench_reference();
        let traj = flat(200.0, 20e-6);
        let cfg = SynthConfig { seed: 99, artifact_amplitude_v: 3.0, ..SynthConfig::default() };
        let cfg = SynthConfig { duration_s: 20e-6, ..cfg };
        let ens = synthesize_shot_ensemble(1, &traj, &c, &cfg, &[1e-6], Execution::Sequential).unwrap();
        let single = synthesize_trace(&traj, &c, &SynthConfig { seed: shot_seed(99, 0), ..cfg.clone() }, &[1e-6]).unwrap();
        assert_eq!(ens[0].voltages_v, single.voltages_v);
        assert_eq!(ens[0].metadata.shot_index, Some(0));
        assert!(synthesize_shot_ensemble(0, &traj, &c, &cfg, &[], Execution::Sequential).is_err());
    }

    #[test]
    fn ensemble_mean_converges_to_deterministic_part() {
        let c = ReceiverChain::bench_reference();
        let traj = flat(200.0, 10e-6);
        let cfg = SynthConfig { seed: 5, artifact_amplitude_v: 20.0, artifact_duration_s: 5e-6, ..quiet_cfg(10e-6) };
        let ens = synthesize_shot_ensemble(1000, &traj, &c, &cfg, &[2e-6], Execution::default()).unwrap();
        let sd = c.output_noise(200.0).sqrt();
        let bound = 3.0 * sd / (1000f64).sqrt();
        let mut outside = 0;
        for k in 0..ens[0].len() {
            let mean = ens.iter().map(|t| t.voltages_v[k]).sum::<f64>() / 1000.0;
            let expected = artifact_waveform(20.0, ens[0].time_at(k) - 2e-6, 5e-6);
            if (mean - expected).abs() > bound {
                outside += 1;
            }
        }
        // 3σ: expect about 0.3% of 100 samples outside
        assert!(outside <= 3, "{outside}");
    }

    #[test]
    fn parallel_and_sequential_ensembles_agree() {
        let c = ReceiverChain::bench_reference();
        let traj = flat(200.0, 10e-6);
        let cfg = SynthConfig { duration_s: 10e-6, ..SynthConfig::default() };
        let a = synthesize_shot_ensemble(16, &traj, &c, &cfg, &[], Execution::Sequential).unwrap();
        let b = synthesize_shot_ensemble(16, &traj, &c, &cfg, &[], Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pink_density_meets_floor_at_corner() {
        let dt = 1e-7;
        let m = PinkNoiseModel::new(1e6, dt).unwrap();
        assert!((m.density(1e6, dt) - 2.0 * dt).abs() < 1e-15);
        // roughly 1/f across the band below the corner
        let ratio = m.density(1e4, dt) / m.density(1e5, dt);
        assert!((ratio - 10.0).abs() < 1.5, "{ratio}");
    }

    #[test]
    fn rejects_short_trajectory_and_bad_config() {
        let c = ReceiverChain::bench_reference();
        assert!(synthesize_trace(&flat(100.0, 5e-6), &c, &quiet_cfg(10e-6), &[]).is_err());
        assert!(synthesize_trace(&flat(100.0, 1.0), &c, &quiet_cfg(5e-7), &[]).is_err());
        let bad = SynthConfig { sample_interval_s: 0.0, ..quiet_cfg(1e-5) };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn digest_ignores_seed() {
        let a = SynthConfig::default();
        let b = SynthConfig { seed: 77, ..a.clone() };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), SynthConfig { voltage_scale: 2.0, ..a }.digest());
        assert_eq!(SynthConfig::default().digest().len(), 64);
    }
}
