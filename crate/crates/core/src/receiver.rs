//! Receiver-side noise calibration.
//!
//! The monitoring receiver is a front-end LNA described by its noise
//! parameters followed by the rest of the chain lumped into a single noise
//! temperature `T_REC`. The quantity of interest is the ratio of receiver
//! output noise power with the mode at two different temperatures, `ΔP`.

use num_complex::Complex64;

use crate::constants::NOISE_REFERENCE_T0_K;
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Four-parameter noise model of an amplifier plus its available gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnaNoiseParameters {
    pub t_min_k: f64,
    pub noise_resistance_ohm: f64,
    pub gamma_opt: Complex64,
    pub linear_gain: f64,
    pub reference_z0_ohm: f64,
    pub reference_t0_k: f64,
}

impl LnaNoiseParameters {
    pub fn new(
        t_min_k: f64,
        noise_resistance_ohm: f64,
        gamma_opt: Complex64,
        linear_gain: f64,
    ) -> Result<Self> {
        let p = LnaNoiseParameters {
            t_min_k,
            noise_resistance_ohm,
            gamma_opt,
            linear_gain,
            reference_z0_ohm: 50.0,
            reference_t0_k: NOISE_REFERENCE_T0_K,
        };
        p.validate()?;
        Ok(p)
    }

    /// Front end of the 1.45 GHz bench receiver: HEMT LNA with
    /// `T_min = 11.6 K`, `R_n = 2 Ω`, `Γ_opt = 0.073 + 0.125i`, `G = 166`.
    pub fn bench_reference() -> Self {
        LnaNoiseParameters {
            t_min_k: 11.6,
            noise_resistance_ohm: 2.0,
            gamma_opt: Complex64::new(0.073, 0.125),
            linear_gain: 166.0,
            reference_z0_ohm: 50.0,
            reference_t0_k: NOISE_REFERENCE_T0_K,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("T_min", self.t_min_k)?;
        ensure_non_negative("noise resistance", self.noise_resistance_ohm)?;
        ensure_positive("LNA gain", self.linear_gain)?;
        ensure_positive("reference impedance", self.reference_z0_ohm)?;
        ensure_non_negative("reference temperature", self.reference_t0_k)?;
        if !(self.gamma_opt.norm() < 1.0) {
            return Err(Error::domain(format!(
                "|Γ_opt| must be < 1, got {}",
                self.gamma_opt.norm()
            )));
        }
        Ok(())
    }

    /// `4·T0·(R_n/Z0)·|Γ − Γ_opt|² / |1 + Γ_opt|²`, the mismatch term shared
    /// by the input-noise and receiver-output formulas.
    fn mismatch_term(&self, gamma: Complex64) -> f64 {
        4.0 * self.reference_t0_k * (self.noise_resistance_ohm / self.reference_z0_ohm)
            * (gamma - self.gamma_opt).norm_sqr()
            / (1.0 + self.gamma_opt).norm_sqr()
    }
}

/// Input-referred noise temperature of the LNA driven from a source with
/// reflection coefficient `gamma_s`.
pub fn lna_input_noise_temperature(p: &LnaNoiseParameters, gamma_s: Complex64) -> Result<f64> {
    let mag2 = gamma_s.norm_sqr();
    if !(mag2 < 1.0) {
        return Err(Error::domain(format!(
            "|Γ_s| must be < 1, got {}",
            gamma_s.norm()
        )));
    }
    Ok(p.t_min_k + p.mismatch_term(gamma_s) / (1.0 - mag2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierStage {
    pub noise_temperature_k: f64,
    pub linear_gain: f64,
}

impl AmplifierStage {
    pub fn new(noise_temperature_k: f64, linear_gain: f64) -> Result<Self> {
        ensure_non_negative("stage noise temperature", noise_temperature_k)?;
        ensure_positive("stage gain", linear_gain)?;
        Ok(AmplifierStage {
            noise_temperature_k,
            linear_gain,
        })
    }

    /// Stage specified by noise figure and gain in dB.
    pub fn from_db(noise_figure_db: f64, gain_db: f64) -> Result<Self> {
        Self::new(
            noise_temperature_from_figure(noise_figure_db)?,
            10f64.powf(gain_db / 10.0),
        )
    }
}

/// Input-referred noise temperature of a cascade,
/// `T1 + T2/G1 + T3/(G1·G2) + …`.
pub fn friis_cascade(stages: &[AmplifierStage]) -> Result<f64> {
    if stages.is_empty() {
        return Err(Error::domain("Friis cascade needs at least one stage"));
    }
    let mut total = 0.0;
    let mut gain = 1.0;
    for s in stages {
        total += s.noise_temperature_k / gain;
        gain *= s.linear_gain;
    }
    Ok(total)
}

/// Noise figure in dB of a device with input noise temperature `t_k`,
/// referenced to 290 K.
pub fn noise_figure_db(t_k: f64) -> Result<f64> {
    ensure_non_negative("noise temperature", t_k)?;
    Ok(10.0 * (1.0 + t_k / NOISE_REFERENCE_T0_K).log10())
}

/// Inverse of [`noise_figure_db`].
pub fn noise_temperature_from_figure(nf_db: f64) -> Result<f64> {
    ensure_non_negative("noise figure", nf_db)?;
    Ok(NOISE_REFERENCE_T0_K * (10f64.powf(nf_db / 10.0) - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YFactorResult {
    pub temperature_k: f64,
    /// Set when the raw estimate was negative and clamped to zero.
    pub clamped: bool,
    pub raw_temperature_k: f64,
}

/// Y-factor estimate `(T_hot − Y·T_cold) / (Y − 1)` of a device's noise
/// temperature from the hot/cold output power ratio `y`.
pub fn y_factor_noise_temperature(t_hot_k: f64, t_cold_k: f64, y: f64) -> Result<YFactorResult> {
    ensure_non_negative("cold reference temperature", t_cold_k)?;
    if !(t_hot_k.is_finite() && t_hot_k > t_cold_k) {
        return Err(Error::domain(format!(
            "hot reference ({t_hot_k} K) must exceed cold reference ({t_cold_k} K)"
        )));
    }
    if !(y.is_finite() && y > 1.0) {
        return Err(Error::domain(format!("Y factor must exceed 1, got {y}")));
    }
    let raw = (t_hot_k - y * t_cold_k) / (y - 1.0);
    Ok(YFactorResult {
        temperature_k: raw.max(0.0),
        clamped: raw < 0.0,
        raw_temperature_k: raw,
    })
}

/// Front-end LNA, lumped back-end, and the source match at the monitoring
/// port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverChain {
    pub front_end: LnaNoiseParameters,
    pub t_rec_k: f64,
    /// Reflection coefficient of the cavity port seen by the LNA; zero for a
    /// critically coupled monitoring port.
    pub gamma_c: Complex64,
    /// Image-band noise for single-conversion receivers; zero for homodyne.
    pub t_image_k: f64,
}

impl ReceiverChain {
    pub fn new(front_end: LnaNoiseParameters, t_rec_k: f64) -> Result<Self> {
        let chain = ReceiverChain {
            front_end,
            t_rec_k,
            gamma_c: Complex64::new(0.0, 0.0),
            t_image_k: 0.0,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// The bench receiver with its `T_REC = 36.1 K` back end.
    pub fn bench_reference() -> Self {
        ReceiverChain {
            front_end: LnaNoiseParameters::bench_reference(),
            t_rec_k: 36.1,
            gamma_c: Complex64::new(0.0, 0.0),
            t_image_k: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.front_end.validate()?;
        ensure_non_negative("T_REC", self.t_rec_k)?;
        ensure_non_negative("T_image", self.t_image_k)?;
        if !(self.gamma_c.norm() <= 1.0) {
            return Err(Error::domain(format!(
                "|Γ_c| must be <= 1, got {}",
                self.gamma_c.norm()
            )));
        }
        Ok(())
    }

    /// Receiver output noise power in units of kelvin × (linear gain) with the
    /// mode at `t_mode_k`:
    ///
    /// `G·[(T_min + T_mode)(1 − |Γc|²) + 4T0(R_n/Z0)|Γc − Γopt|²/|1 + Γopt|² + T_image] + T_REC`
    pub fn output_noise(&self, t_mode_k: f64) -> f64 {
        let p = &self.front_end;
        let inner = (p.t_min_k + t_mode_k) * (1.0 - self.gamma_c.norm_sqr())
            + p.mismatch_term(self.gamma_c)
            + self.t_image_k;
        p.linear_gain * inner + self.t_rec_k
    }

    /// `ΔP` reached as the mode temperature goes to zero.
    pub fn deltap_floor_db(&self, t_mode_ambient_k: f64) -> f64 {
        10.0 * (self.output_noise(0.0) / self.output_noise(t_mode_ambient_k)).log10()
    }
}

/// Reduction in receiver output noise power, in dB, when the mode is at
/// `t_mode_k` rather than `t_mode_ambient_k`.
pub fn noise_power_reduction_db(t_mode_k: f64, t_mode_ambient_k: f64, chain: &ReceiverChain) -> f64 {
    10.0 * (chain.output_noise(t_mode_k) / chain.output_noise(t_mode_ambient_k)).log10()
}

/// Mode temperature that produces a measured `ΔP`, by bisection.
///
/// Positive values (a mode hotter than the reference) are accepted; the
/// upper bracket is widened until it encloses the target.
pub fn infer_mode_temperature(
    delta_p_db: f64,
    t_mode_ambient_k: f64,
    chain: &ReceiverChain,
) -> Result<f64> {
    ensure_non_negative("ambient mode temperature", t_mode_ambient_k)?;
    let floor = chain.deltap_floor_db(t_mode_ambient_k);
    if !delta_p_db.is_finite() || delta_p_db < floor {
        return Err(Error::OutOfRange {
            value_db: delta_p_db,
            floor_db: floor,
        });
    }
    let (mut lo, mut hi) = (0.0, t_mode_ambient_k.max(1.0));
    while noise_power_reduction_db(hi, t_mode_ambient_k, chain) < delta_p_db {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::OutOfRange {
                value_db: delta_p_db,
                floor_db: floor,
            });
        }
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if noise_power_reduction_db(mid, t_mode_ambient_k, chain) < delta_p_db {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPCurvePoint {
    pub t_mode_k: f64,
    pub delta_p_db: f64,
}

/// Tabulates `ΔP(T_mode)` at `n` evenly spaced temperatures in
/// `[t_lo_k, t_hi_k]`, both within `[0, t_mode_ambient_k]`.
pub fn emit_deltap_curve(
    chain: &ReceiverChain,
    t_mode_ambient_k: f64,
    t_lo_k: f64,
    t_hi_k: f64,
    n: usize,
) -> Result<Vec<DeltaPCurvePoint>> {
    ensure_non_negative("curve start", t_lo_k)?;
    if !(t_hi_k >= t_lo_k && t_hi_k <= t_mode_ambient_k) {
        return Err(Error::domain(format!(
            "curve range [{t_lo_k}, {t_hi_k}] must lie within [0, {t_mode_ambient_k}]"
        )));
    }
    Ok(crate::noise::linspace(t_lo_k, t_hi_k, n)
        .into_iter()
        .map(|t| DeltaPCurvePoint {
            t_mode_k: t,
            delta_p_db: noise_power_reduction_db(t, t_mode_ambient_k, chain),
        })
        .collect())
}
