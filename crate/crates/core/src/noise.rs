//! Closed-form thermal arithmetic for a cavity mode coupled to several baths.
//!
//! All bath temperatures are noise temperatures in kelvin. Mode temperatures
//! are computed in the equipartition picture (a weighted average of bath
//! temperatures); the Bose–Einstein correction only enters through
//! [`photon_occupancy`] and [`temperature_from_occupancy`].

use crate::constants::{photon_energy_kelvin, BOLTZMANN_K, PLANCK_H};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::exec::Execution;

/// Divisor turning an insertion loss in dB into the first-order loss fraction.
pub const LINEAR_LOSS_DB_SCALE: f64 = 4.34;

/// Above this insertion loss the linear link model is flagged as inaccurate.
pub const LINEAR_LOSS_WARN_DB: f64 = 0.5;

/// Mean photon number of a mode at `frequency_hz` in equilibrium at
/// `temperature_k` (Bose–Einstein).
pub fn photon_occupancy(frequency_hz: f64, temperature_k: f64) -> Result<f64> {
    ensure_positive("frequency", frequency_hz)?;
    ensure_non_negative("temperature", temperature_k)?;
    if temperature_k == 0.0 {
        return Ok(0.0);
    }
    let x = photon_energy_kelvin(frequency_hz) / temperature_k;
    Ok(1.0 / x.exp_m1())
}

/// Inverse of [`photon_occupancy`]: `T = h·f / (k_B · ln(1 + 1/n))`.
pub fn temperature_from_occupancy(frequency_hz: f64, occupancy: f64) -> Result<f64> {
    ensure_positive("frequency", frequency_hz)?;
    ensure_non_negative("occupancy", occupancy)?;
    if occupancy == 0.0 {
        return Ok(0.0);
    }
    Ok(photon_energy_kelvin(frequency_hz) / (1.0 / occupancy).ln_1p())
}

/// A single resonant mode of the cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMode {
    frequency_hz: f64,
    intrinsic_q: f64,
}

impl CavityMode {
    pub fn new(frequency_hz: f64, intrinsic_q: f64) -> Result<Self> {
        ensure_positive("mode frequency", frequency_hz)?;
        ensure_positive("intrinsic Q", intrinsic_q)?;
        Ok(CavityMode {
            frequency_hz,
            intrinsic_q,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn intrinsic_q(&self) -> f64 {
        self.intrinsic_q
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }

    /// Intrinsic (unloaded) linewidth `f0/Q0` in Hz.
    pub fn intrinsic_bandwidth_hz(&self) -> f64 {
        self.frequency_hz / self.intrinsic_q
    }

    /// Loaded quality factor `Q0 / (1 + Σκ)`.
    pub fn loaded_q(&self, total_coupling: f64) -> f64 {
        self.intrinsic_q / (1.0 + total_coupling)
    }

    /// Photons per kelvin in the equipartition limit, `k_B / (h·f0)`.
    pub fn epsilon(&self) -> f64 {
        BOLTZMANN_K / (PLANCK_H * self.frequency_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossModel {
    /// `T = L·T_load + (1 − L)·T_link` with `L = 10^(−dB/10)`.
    #[default]
    Exact,
    /// First-order expansion `T = (1 − λ)·T_load + λ·T_link`, `λ = dB/4.34`.
    Linear,
    /// Lossless connection.
    None,
}

/// One external bath coupled to the mode through a (possibly lossy) link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathPort {
    coupling: f64,
    load_temperature_k: f64,
    link_loss_db: f64,
    link_temperature_k: f64,
    loss_model: LossModel,
}

impl BathPort {
    pub fn new(
        coupling: f64,
        load_temperature_k: f64,
        link_loss_db: f64,
        link_temperature_k: f64,
        loss_model: LossModel,
    ) -> Result<Self> {
        ensure_non_negative("coupling factor", coupling)?;
        ensure_non_negative("load temperature", load_temperature_k)?;
        ensure_non_negative("link loss", link_loss_db)?;
        ensure_non_negative("link temperature", link_temperature_k)?;
        if loss_model == LossModel::None && link_loss_db != 0.0 {
            return Err(Error::domain(format!(
                "loss model `none` requires a zero link loss, got {link_loss_db} dB"
            )));
        }
        if loss_model == LossModel::Linear {
            linear_loss_fraction(link_loss_db)?;
        }
        Ok(BathPort {
            coupling,
            load_temperature_k,
            link_loss_db,
            link_temperature_k,
            loss_model,
        })
    }

    /// A port connected directly (no link) to a load at `temperature_k`.
    pub fn lossless(coupling: f64, temperature_k: f64) -> Result<Self> {
        Self::new(coupling, temperature_k, 0.0, 0.0, LossModel::None)
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn load_temperature_k(&self) -> f64 {
        self.load_temperature_k
    }

    pub fn link_loss_db(&self) -> f64 {
        self.link_loss_db
    }

    pub fn link_temperature_k(&self) -> f64 {
        self.link_temperature_k
    }

    pub fn loss_model(&self) -> LossModel {
        self.loss_model
    }

    pub fn with_coupling(mut self, coupling: f64) -> Result<Self> {
        ensure_non_negative("coupling factor", coupling)?;
        self.coupling = coupling;
        Ok(self)
    }

    pub fn with_load_temperature(mut self, temperature_k: f64) -> Result<Self> {
        ensure_non_negative("load temperature", temperature_k)?;
        self.load_temperature_k = temperature_k;
        Ok(self)
    }

    /// Noise temperature presented to the mode at the cavity end of the link.
    pub fn link_output_temperature(&self) -> Result<f64> {
        link_output_temperature(self)
    }
}

fn linear_loss_fraction(link_loss_db: f64) -> Result<f64> {
    let lambda = link_loss_db / LINEAR_LOSS_DB_SCALE;
    if lambda >= 1.0 {
        return Err(Error::domain(format!(
            "linear link model is undefined for {link_loss_db} dB (load weight would be negative)"
        )));
    }
    Ok(lambda)
}

/// Noise temperature seen by the mode through the port's link.
pub fn link_output_temperature(port: &BathPort) -> Result<f64> {
    let (t_load, t_link) = (port.load_temperature_k, port.link_temperature_k);
    match port.loss_model {
        LossModel::None => Ok(t_load),
        LossModel::Exact => {
            let transmission = 10f64.powf(-port.link_loss_db / 10.0);
            Ok(transmission * t_load + (1.0 - transmission) * t_link)
        }
        LossModel::Linear => {
            let lambda = linear_loss_fraction(port.link_loss_db)?;
            if port.link_loss_db > LINEAR_LOSS_WARN_DB {
                log::warn!(
                    "linear link model used at {} dB; it overestimates the link noise above {} dB",
                    port.link_loss_db,
                    LINEAR_LOSS_WARN_DB
                );
            }
            Ok((1.0 - lambda) * t_load + lambda * t_link)
        }
    }
}

/// The cavity's own (intrinsic) bath plus any number of external ports.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSet {
    intrinsic_temperature_k: f64,
    ports: Vec<BathPort>,
}

impl BathSet {
    pub fn new(intrinsic_temperature_k: f64, ports: Vec<BathPort>) -> Result<Self> {
        ensure_non_negative("intrinsic temperature", intrinsic_temperature_k)?;
        Ok(BathSet {
            intrinsic_temperature_k,
            ports,
        })
    }

    pub fn isolated(intrinsic_temperature_k: f64) -> Result<Self> {
        Self::new(intrinsic_temperature_k, Vec::new())
    }

    pub fn intrinsic_temperature_k(&self) -> f64 {
        self.intrinsic_temperature_k
    }

    pub fn ports(&self) -> &[BathPort] {
        &self.ports
    }

    pub fn with_port(mut self, port: BathPort) -> Self {
        self.ports.push(port);
        self
    }

    /// Restriction of the set to the ports selected by `keep`.
    pub fn subset(&self, keep: impl Fn(usize) -> bool) -> BathSet {
        BathSet {
            intrinsic_temperature_k: self.intrinsic_temperature_k,
            ports: self
                .ports
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, p)| *p)
                .collect(),
        }
    }

    pub fn total_coupling(&self) -> f64 {
        self.ports.iter().map(|p| p.coupling).sum()
    }

    /// Per-bath `(weight, temperature)` pairs; the intrinsic bath comes first
    /// with weight 1. Weights are normalised to sum to one.
    pub fn contributions(&self) -> Result<Vec<BathContribution>> {
        let norm = 1.0 + self.total_coupling();
        let mut out = Vec::with_capacity(self.ports.len() + 1);
        out.push(BathContribution {
            weight: 1.0 / norm,
            temperature_k: self.intrinsic_temperature_k,
        });
        for port in &self.ports {
            out.push(BathContribution {
                weight: port.coupling / norm,
                temperature_k: port.link_output_temperature()?,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathContribution {
    pub weight: f64,
    pub temperature_k: f64,
}

impl BathContribution {
    /// This bath's share of the mode temperature, in kelvin.
    pub fn kelvin(&self) -> f64 {
        self.weight * self.temperature_k
    }
}

/// Steady-state mode temperature: the coupling-weighted average of the
/// intrinsic bath (weight 1) and every port's link-transformed temperature.
pub fn mode_temperature(baths: &BathSet) -> Result<f64> {
    let mut numerator = baths.intrinsic_temperature_k;
    let mut denominator = 1.0;
    for port in &baths.ports {
        numerator += port.coupling * port.link_output_temperature()?;
        denominator += port.coupling;
    }
    Ok(numerator / denominator)
}

/// Lowest mode temperature reachable with an over-coupled cooling port whose
/// link adds `lambda·T0` of noise and a critically coupled monitoring port at
/// `t_mon_k`:
///
/// `((1 + κ·λ)·T0 + κ·T_cold + T_mon) / (2 + κ)`
pub fn cooled_mode_temperature_closed_form(
    t0_k: f64,
    kappa_over: f64,
    lambda: f64,
    t_cold_k: f64,
    t_mon_k: f64,
) -> f64 {
    ((1.0 + kappa_over * lambda) * t0_k + kappa_over * t_cold_k + t_mon_k) / (2.0 + kappa_over)
}

/// Grid definition for [`sweep_mode_temperature`].
///
/// Each cell adds one port built from `template` (coupling and load
/// temperature replaced by the grid values) to `base`.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub mode: CavityMode,
    pub base: BathSet,
    pub template: BathPort,
    pub couplings: Vec<f64>,
    pub cold_temperatures_k: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub coupling: f64,
    pub cold_temperature_k: f64,
    pub mode_temperature_k: f64,
    pub occupancy: f64,
}

/// Evaluates the mode temperature and occupancy on a `(κ, T_cold)` grid.
/// Cells are ordered with `T_cold` varying slowest.
pub fn sweep_mode_temperature(grid: &SweepGrid, exec: Execution) -> Result<Vec<SweepCell>> {
    if grid.couplings.is_empty() || grid.cold_temperatures_k.is_empty() {
        return Err(Error::domain("sweep grid is empty"));
    }
    for &k in &grid.couplings {
        ensure_non_negative("swept coupling", k)?;
    }
    for &t in &grid.cold_temperatures_k {
        ensure_non_negative("swept cold temperature", t)?;
    }
    let nk = grid.couplings.len();
    let n = nk * grid.cold_temperatures_k.len();
    exec.map_indexed(n, |i| {
        let coupling = grid.couplings[i % nk];
        let cold = grid.cold_temperatures_k[i / nk];
        let port = grid
            .template
            .with_coupling(coupling)?
            .with_load_temperature(cold)?;
        let t_mode = mode_temperature(&grid.base.clone().with_port(port))?;
        Ok(SweepCell {
            coupling,
            cold_temperature_k: cold,
            mode_temperature_k: t_mode,
            occupancy: photon_occupancy(grid.mode.frequency_hz(), t_mode)?,
        })
    })
    .into_iter()
    .collect()
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F_BENCH: f64 = 1.45e9;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn cooling_port() -> BathPort {
        BathPort::new(3.8, 18.4, 0.19, 290.0, LossModel::Linear).unwrap()
    }

    fn monitor_port() -> BathPort {
        BathPort::new(1.0, 18.4, 6.05, 290.0, LossModel::Exact).unwrap()
    }

    #[test]
    fn occupancy_reference_points() {
        // frozen from 40-digit evaluation
        assert!((photon_occupancy(F_BENCH, 255.4).unwrap() - 3669.619004842351).abs() < 1e-6);
        assert!((photon_occupancy(F_BENCH, 108.1).unwrap() - 1552.905934495018).abs() < 1e-6);
        assert!((photon_occupancy(F_BENCH, 290.0).unwrap() - 4166.823844662361).abs() < 1e-6);
        assert_eq!(photon_occupancy(F_BENCH, 0.0).unwrap(), 0.0);
        assert_eq!(photon_occupancy(1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn occupancy_rejects_bad_inputs() {
        assert!(photon_occupancy(F_BENCH, -1.0).is_err());
        assert!(photon_occupancy(0.0, 10.0).is_err());
        assert!(photon_occupancy(F_BENCH, f64::NAN).is_err());
        assert!(photon_occupancy(f64::INFINITY, 1.0).is_err());
        assert!(temperature_from_occupancy(F_BENCH, -0.1).is_err());
    }

    #[test]
    fn temperature_inverse_points() {
        assert_eq!(temperature_from_occupancy(F_BENCH, 0.0).unwrap(), 0.0);
        let t = temperature_from_occupancy(F_BENCH, 1553.0).unwrap();
        assert!((t - 108.10654592696094).abs() < 1e-9);
        for k in -3..=6 {
            let n = 10f64.powi(k);
            let t = temperature_from_occupancy(F_BENCH, n).unwrap();
            let back = photon_occupancy(F_BENCH, t).unwrap();
            assert!(rel(back, n) < 1e-9, "n = {n}: {back}");
        }
    }

    #[test]
    fn link_temperatures() {
        let p = BathPort::new(1.0, 18.4, 0.0, 290.0, LossModel::Exact).unwrap();
        assert_eq!(p.link_output_temperature().unwrap(), 18.4);
        let p = BathPort::new(1.0, 18.4, 200.0, 290.0, LossModel::Exact).unwrap();
        assert!((p.link_output_temperature().unwrap() - 290.0).abs() < 1e-6);
        let t = monitor_port().link_output_temperature().unwrap();
        assert!((t - 222.5581048601723).abs() < 1e-9);
        let t = cooling_port().link_output_temperature().unwrap();
        assert!((t - 30.29032258064516).abs() < 1e-9);
        let p = BathPort::lossless(2.0, 40.0).unwrap();
        assert_eq!(p.link_output_temperature().unwrap(), 40.0);
    }

    #[test]
    fn link_validation() {
        assert!(BathPort::new(1.0, 18.4, 4.34, 290.0, LossModel::Linear).is_err());
        assert!(BathPort::new(1.0, 18.4, 5.0, 290.0, LossModel::Linear).is_err());
        // warning band is accepted
        assert!(BathPort::new(1.0, 18.4, 1.0, 290.0, LossModel::Linear).is_ok());
        assert!(BathPort::new(1.0, 18.4, 1.0, 290.0, LossModel::None).is_err());
        assert!(BathPort::new(-1.0, 18.4, 0.0, 290.0, LossModel::Exact).is_err());
        assert!(BathPort::new(f64::NAN, 18.4, 0.0, 290.0, LossModel::Exact).is_err());
    }

    #[test]
    fn mode_temperature_reference_configs() {
        assert_eq!(mode_temperature(&BathSet::isolated(290.0).unwrap()).unwrap(), 290.0);
        let sym = BathSet::new(77.0, vec![BathPort::lossless(1.0, 77.0).unwrap()]).unwrap();
        assert!((mode_temperature(&sym).unwrap() - 77.0).abs() < 1e-12);

        let cooled = BathSet::new(290.0, vec![cooling_port(), monitor_port()]).unwrap();
        let t = mode_temperature(&cooled).unwrap();
        assert!((t - 108.21747080459033).abs() < 1e-9);
        assert!((t - 108.2).abs() < 2.0);

        let ambient = BathSet::new(290.0, vec![monitor_port()]).unwrap();
        let t = mode_temperature(&ambient).unwrap();
        assert!((t - 256.27905243008616).abs() < 1e-9);
        assert!((t - 256.3).abs() < 1.5);
    }

    #[test]
    fn contributions_sum_to_mode_temperature() {
        let set = BathSet::new(290.0, vec![cooling_port(), monitor_port()]).unwrap();
        let c = set.contributions().unwrap();
        let w: f64 = c.iter().map(|b| b.weight).sum();
        let t: f64 = c.iter().map(BathContribution::kelvin).sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((t - mode_temperature(&set).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_values() {
        let lambda = 0.19 / 4.34;
        let t = cooled_mode_temperature_closed_form(290.0, 3.8, lambda, 18.4, 220.9);
        assert!((t - 108.45935166057524).abs() < 1e-9);
        assert!((t - 108.1).abs() < 5.0);
        let t = cooled_mode_temperature_closed_form(290.0, 3.8, lambda, 18.4, 220.3);
        assert!((t - 108.2).abs() < 0.2);
        assert_eq!(cooled_mode_temperature_closed_form(290.0, 0.0, 0.0, 4.0, 290.0), 290.0);
        let t = cooled_mode_temperature_closed_form(290.0, 10.0, 0.0, 18.4, 220.9);
        assert!((t - 57.90833333333333).abs() < 1e-9);
    }

    #[test]
    fn sweep_reproduces_operating_point_and_trends() {
        let mode = CavityMode::new(F_BENCH, 164_000.0).unwrap();
        let grid = SweepGrid {
            mode,
            base: BathSet::new(290.0, vec![monitor_port()]).unwrap(),
            template: cooling_port(),
            couplings: vec![3.8],
            cold_temperatures_k: vec![18.4],
        };
        let cells = sweep_mode_temperature(&grid, Execution::Sequential).unwrap();
        assert_eq!(cells.len(), 1);
        assert!((cells[0].mode_temperature_k - 108.21747080459033).abs() < 1e-9);

        let grid = SweepGrid {
            mode,
            base: BathSet::isolated(290.0).unwrap(),
            template: BathPort::lossless(1.0, 0.0).unwrap(),
            couplings: linspace(0.0, 30.0, 31),
            cold_temperatures_k: vec![290.0],
        };
        for c in sweep_mode_temperature(&grid, Execution::Parallel).unwrap() {
            assert!((c.mode_temperature_k - 290.0).abs() < 1e-9);
        }

        let grid = SweepGrid {
            couplings: linspace(10.5, 40.0, 12),
            cold_temperatures_k: linspace(2.0, 19.5, 8),
            ..grid
        };
        for c in sweep_mode_temperature(&grid, Execution::Parallel).unwrap() {
            assert!(c.occupancy > 100.0 && c.occupancy < 1000.0, "{c:?}");
        }
    }

    #[test]
    fn sweep_rejects_empty_grid() {
        let grid = SweepGrid {
            mode: CavityMode::new(F_BENCH, 1e4).unwrap(),
            base: BathSet::isolated(290.0).unwrap(),
            template: BathPort::lossless(1.0, 0.0).unwrap(),
            couplings: vec![],
            cold_temperatures_k: vec![10.0],
        };
        assert!(sweep_mode_temperature(&grid, Execution::Sequential).is_err());
    }

    #[test]
    fn sweep_modes_agree() {
        let grid = SweepGrid {
            mode: CavityMode::new(F_BENCH, 1e4).unwrap(),
            base: BathSet::new(290.0, vec![monitor_port()]).unwrap(),
            template: cooling_port(),
            couplings: linspace(0.0, 20.0, 41),
            cold_temperatures_k: linspace(0.0, 300.0, 31),
        };
        assert_eq!(
            sweep_mode_temperature(&grid, Execution::Sequential).unwrap(),
            sweep_mode_temperature(&grid, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn linear_vs_exact_second_order_bound() {
        // difference is the λ²/2 term of the exponential, up to the 4.34 rounding
        for i in 0..=50 {
            let db = 0.01 * i as f64;
            let ex = BathPort::new(1.0, 18.2, db, 290.0, LossModel::Exact).unwrap();
            let li = BathPort::new(1.0, 18.2, db, 290.0, LossModel::Linear).unwrap();
            let diff = (ex.link_output_temperature().unwrap() - li.link_output_temperature().unwrap()).abs();
            let a = db * std::f64::consts::LN_10 / 10.0;
            let bound = (a * a / 2.0 + (db / 4.34 - a).abs()) * (290.0 - 18.2) * 1.01;
            assert!(diff <= bound + 1e-12, "{db} dB: {diff} > {bound}");
            if db <= 0.15 {
                assert!(diff < 0.25);
            }
        }
    }

    #[test]
    fn rayleigh_jeans_limit() {
        for &(f, t) in &[(1e6, 1000.0), (1e3, 4.0), (1.45e9, 1e5)] {
            let x = photon_energy_kelvin(f) / t;
            assert!(x < 1e-3);
            let n = photon_occupancy(f, t).unwrap();
            assert!((n - (1.0 / x - 0.5)).abs() < 1e-3, "f={f} T={t}");
        }
    }

    fn arb_port() -> impl Strategy<Value = BathPort> {
        (0.0..20.0f64, 0.0..400.0f64, 0.0..10.0f64, 0.0..400.0f64, 0..3u8).prop_map(
            |(k, tl, db, tk, m)| match m {
                0 => BathPort::new(k, tl, db, tk, LossModel::Exact).unwrap(),
                1 => BathPort::new(k, tl, db.min(4.0), tk, LossModel::Linear).unwrap(),
                _ => BathPort::lossless(k, tl).unwrap(),
            },
        )
    }

    proptest! {
        #[test]
        fn mode_temperature_is_bounded(t0 in 0.0..400.0f64, ports in prop::collection::vec(arb_port(), 0..6)) {
            let set = BathSet::new(t0, ports).unwrap();
            let temps: Vec<f64> = set.contributions().unwrap().iter().map(|c| c.temperature_k).collect();
            let lo = temps.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = temps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let t = mode_temperature(&set).unwrap();
            prop_assert!(t >= lo - 1e-9 && t <= hi + 1e-9);
        }

        #[test]
        fn adding_a_port_moves_toward_it(t0 in 0.0..400.0f64, ports in prop::collection::vec(arb_port(), 0..4),
                                          k in 0.01..10.0f64, t_new in 0.0..400.0f64) {
            let set = BathSet::new(t0, ports).unwrap();
            let before = mode_temperature(&set).unwrap();
            prop_assume!((t_new - before).abs() > 1e-6);
            let after = mode_temperature(&set.with_port(BathPort::lossless(k, t_new).unwrap())).unwrap();
            if t_new < before { prop_assert!(after < before); } else { prop_assert!(after > before); }
        }

        #[test]
        fn closed_form_matches_equivalent_bath_set(t0 in 0.0..400.0f64, kappa in 0.0..50.0f64, lambda in 0.0..0.5f64,
                                                   t_cold in 0.0..300.0f64, t_mon in 0.0..400.0f64) {
            let closed = cooled_mode_temperature_closed_form(t0, kappa, lambda, t_cold, t_mon);
            let set = BathSet::new(t0, vec![
                BathPort::lossless(kappa, t_cold + lambda * t0).unwrap(),
                BathPort::lossless(1.0, t_mon).unwrap(),
            ]).unwrap();
            let general = mode_temperature(&set).unwrap();
            prop_assert!((closed - general).abs() <= 1e-12 * general.abs().max(1e-300));
        }

        #[test]
        fn occupancy_round_trip(f in 1e6..1e12f64, t in 1e-3..1e4f64) {
            let n = photon_occupancy(f, t).unwrap();
            let back = temperature_from_occupancy(f, n).unwrap();
            prop_assert!(rel(back, t) < 1e-9);
        }

        #[test]
        fn occupancy_monotone_in_temperature(f in 1e6..1e12f64, t in 1e-2..1e4f64, dt in 1e-3..10.0f64) {
            prop_assert!(photon_occupancy(f, t + dt).unwrap() > photon_occupancy(f, t).unwrap());
        }

        #[test]
        fn sweep_decreases_with_coupling(t_cold in 0.0..289.0f64, k in 0.0..30.0f64, dk in 0.01..5.0f64) {
            let grid = SweepGrid {
                mode: CavityMode::new(1.45e9, 1e5).unwrap(),
                base: BathSet::isolated(290.0).unwrap(),
                template: BathPort::lossless(0.0, 0.0).unwrap(),
                couplings: vec![k, k + dk],
                cold_temperatures_k: vec![t_cold],
            };
            let cells = sweep_mode_temperature(&grid, Execution::Sequential).unwrap();
            prop_assert!(cells[1].mode_temperature_k < cells[0].mode_temperature_k);
        }
    }
}
