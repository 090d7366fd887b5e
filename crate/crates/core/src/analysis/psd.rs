//! Welch power spectral density and band-averaged ΔP.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

/// One-sided density in V²/Hz on bins `k·fs/L`, `k = 0..=L/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub density: Vec<f64>,
    pub segments: usize,
}

impl PowerSpectrum {
    pub fn bin_width_hz(&self) -> f64 {
        if self.frequencies_hz.len() < 2 {
            return 0.0;
        }
        self.frequencies_hz[1] - self.frequencies_hz[0]
    }

    /// Integrated power, `Σ S·Δf`.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width_hz()
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.frequencies_hz.last().copied().unwrap_or(0.0)
    }

    /// Bin-wise mean of spectra on the same frequency grid.
    pub fn average(spectra: &[PowerSpectrum]) -> Result<PowerSpectrum> {
        let first = spectra
            .first()
            .ok_or_else(|| Error::domain("nothing to average"))?;
        if spectra.iter().any(|s| s.frequencies_hz != first.frequencies_hz) {
            return Err(Error::domain("spectra are on different frequency grids"));
        }
        let n = spectra.len() as f64;
        let mut density = vec![0.0; first.density.len()];
        for s in spectra {
            for (d, v) in density.iter_mut().zip(&s.density) {
                *d += v / n;
            }
        }
        Ok(PowerSpectrum {
            frequencies_hz: first.frequencies_hz.clone(),
            density,
            segments: spectra.iter().map(|s| s.segments).sum(),
        })
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos())
        .collect()
}

/// Averaged periodogram: Hann-windowed segments of `segment_len` samples
/// with 50 % overlap, each segment's mean removed before windowing.
/// Normalised so that `Σ S·Δf` equals the variance of stationary input.
pub fn spectral_density(x: &[f64], sample_interval_s: f64, segment_len: usize) -> Result<PowerSpectrum> {
    if segment_len < 2 || segment_len > x.len() {
        return Err(Error::domain(format!(
            "segment length {segment_len} must be in [2, {}]",
            x.len()
        )));
    }
    let fs = 1.0 / sample_interval_s;
    let window = hann(segment_len);
    let norm = 2.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let n_bins = segment_len / 2 + 1;
    let step = (segment_len / 2).max(1);

    let mut density = vec![0.0; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut segments = 0;
    let mut start = 0;
    while start + segment_len <= x.len() {
        let seg = &x[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, d) in density.iter_mut().enumerate() {
            *d += buf[k].norm_sqr();
        }
        segments += 1;
        start += step;
    }
    for (k, d) in density.iter_mut().enumerate() {
        let edge = k == 0 || (segment_len.is_multiple_of(2) && k == n_bins - 1);
        *d *= norm / segments as f64 * if edge { 0.5 } else { 1.0 };
    }
    Ok(PowerSpectrum {
        frequencies_hz: (0..n_bins).map(|k| k as f64 * fs / segment_len as f64).collect(),
        density,
        segments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandDeltaP {
    pub delta_p_db: f64,
    pub standard_error_db: f64,
    pub bins: usize,
}

fn band_stats(psd: &PowerSpectrum, lo: f64, hi: f64) -> (f64, f64, usize) {
    let vals: Vec<f64> = psd
        .frequencies_hz
        .iter()
        .zip(&psd.density)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, d)| *d)
        .collect();
    let m = vals.len();
    if m == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = vals.iter().sum::<f64>() / m as f64;
    let sd = if m > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd, m)
}

/// `10·log10` of the ratio of mean densities in `[lo, hi]`. The standard
/// error combines the bin-to-bin scatter of each spectrum, `sd/(mean·√M)`,
/// converted to dB.
pub fn band_averaged_deltap(
    cold: &PowerSpectrum,
    ambient: &PowerSpectrum,
    band_hz: (f64, f64),
) -> Result<BandDeltaP> {
    let (lo, hi) = band_hz;
    if !(hi >= lo) {
        return Err(Error::domain(format!("band [{lo}, {hi}] Hz is empty")));
    }
    for (name, psd) in [("cold", cold), ("ambient", ambient)] {
        if hi > psd.nyquist_hz() * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "band edge {hi} Hz exceeds the {name} spectrum's Nyquist frequency {} Hz",
                psd.nyquist_hz()
            )));
        }
    }
    let (mc, sc, nc) = band_stats(cold, lo, hi);
    let (ma, sa, na) = band_stats(ambient, lo, hi);
    if nc == 0 || na == 0 {
        return Err(Error::domain(format!("no spectral bins in [{lo}, {hi}] Hz")));
    }
    if !(mc > 0.0 && ma > 0.0) {
        return Err(Error::domain("band power is zero"));
    }
    let rel_c = sc / (mc * (nc as f64).sqrt());
    let rel_a = sa / (ma * (na as f64).sqrt());
    Ok(BandDeltaP {
        delta_p_db: 10.0 * (mc / ma).log10(),
        standard_error_db: 10.0 / std::f64::consts::LN_10 * (rel_c * rel_c + rel_a * rel_a).sqrt(),
        bins: nc.min(na),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn parseval_on_white_noise() {
        let dt = 1e-7;
        let x = white(1 << 18, 2.0, 1);
        let psd = spectral_density(&x, dt, 1024).unwrap();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
        assert!(((psd.total_power() - var) / var).abs() < 0.01);
        assert_eq!(psd.segments, 511);
        assert!((psd.nyquist_hz() - 5e6).abs() < 1e-6);
    }

    #[test]
    fn white_level_is_variance_over_nyquist() {
        let dt = 1e-7;
        let x = white(1 << 18, 1.0, 2);
        let psd = spectral_density(&x, dt, 512).unwrap();
        let level = 1.0 / 5e6;
        // each bin averages ~1000 segments (50 % overlap Hann is ~1.9 dof
        // per segment pair); allow 3σ of roughly 1/√(0.9·1023)
        let tol = 3.0 / (0.9 * psd.segments as f64).sqrt();
        let interior = &psd.density[1..psd.density.len() - 1];
        let bad = interior.iter().filter(|d| ((*d / level) - 1.0).abs() > tol).count();
        assert!(bad <= 3, "{bad} of {} bins outside", interior.len());
    }

    #[test]
    fn sinusoid_has_one_dominant_bin() {
        let dt = 1e-7;
        let f0 = 64.0 / (256.0 * dt);
        let x: Vec<f64> = (0..4096).map(|k| (2.0 * PI * f0 * k as f64 * dt).sin()).collect();
        let psd = spectral_density(&x, dt, 256).unwrap();
        let (k_max, &p_max) = psd
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_eq!(k_max, 64);
        let others = psd
            .density
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as i64 - 64).abs() > 1)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max);
        assert!(others < 1e-6 * p_max);
    }

    #[test]
    fn band_cases() {
        let dt = 1e-8;
        let a = spectral_density(&white(1 << 16, 1.0, 3), dt, 256).unwrap();
        let same = band_averaged_deltap(&a, &a, (5e6, 10e6)).unwrap();
        assert_eq!(same.delta_p_db, 0.0);
        assert!(same.bins > 10);

        let half = PowerSpectrum {
            density: a.density.iter().map(|d| d * 0.5).collect(),
            ..a.clone()
        };
        let r = band_averaged_deltap(&half, &a, (5e6, 10e6)).unwrap();
        assert!((r.delta_p_db + 3.0103).abs() < 1e-4);

        assert!(band_averaged_deltap(&a, &a, (10e6, 5e6)).is_err());
        assert!(band_averaged_deltap(&a, &a, (5e6, 60e6)).is_err());
        assert!(band_averaged_deltap(&a, &a, (5.01e6, 5.02e6)).is_err());
    }

    #[test]
    fn band_deltap_is_scale_invariant() {
        let dt = 1e-8;
        let c = white(1 << 14, 0.7, 4);
        let r = white(1 << 14, 1.0, 5);
        let base = band_averaged_deltap(
            &spectral_density(&c, dt, 256).unwrap(),
            &spectral_density(&r, dt, 256).unwrap(),
            (5e6, 10e6),
        )
        .unwrap();
        let k = 37.5;
        let sc: Vec<f64> = c.iter().map(|v| v * k).collect();
        let sr: Vec<f64> = r.iter().map(|v| v * k).collect();
        let scaled = band_averaged_deltap(
            &spectral_density(&sc, dt, 256).unwrap(),
            &spectral_density(&sr, dt, 256).unwrap(),
            (5e6, 10e6),
        )
        .unwrap();
        assert!((base.delta_p_db - scaled.delta_p_db).abs() < 1e-9);
        assert!((base.delta_p_db - 20.0 * 0.7f64.log10()).abs() < 3.0 * base.standard_error_db + 0.05);
    }

    #[test]
    fn rejects_bad_segment() {
        assert!(spectral_density(&[1.0; 10], 1e-7, 20).is_err());
        assert!(spectral_density(&[1.0; 10], 1e-7, 1).is_err());
    }
}
