//! Photon-number dynamics of a mode whose external ports are switched in and
//! out over time.
//!
//! With a fixed set of active ports the semiclassical rate equation
//!
//! ```text
//! dq/dt = −(ω/Q0)·(q − ε·T0) − Σ_active (ω·κ_i/Q0)·(q − ε·T_i')
//! ```
//!
//! relaxes exponentially toward `ε·T_mode` at rate `ω·(1 + Σκ_i)/Q0`. A
//! [`SwitchSchedule`] makes the active set piecewise constant in time, so the
//! exact solution is piecewise exponential ([`evolve_occupancy`]). A
//! fourth-order Runge–Kutta integrator of the same equation
//! ([`integrate_occupancy_rk4`]) is kept as an independent check.

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::noise::{mode_temperature, temperature_from_occupancy, BathSet, CavityMode};

/// Subset of a [`BathSet`]'s ports, as a bit mask over port indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PortSet(u64);

impl PortSet {
    pub const MAX_PORTS: usize = 64;

    pub fn empty() -> Self {
        PortSet(0)
    }

    /// The first `n` ports.
    pub fn all(n: usize) -> Self {
        assert!(n <= Self::MAX_PORTS);
        if n == 64 {
            PortSet(u64::MAX)
        } else {
            PortSet((1u64 << n) - 1)
        }
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &i in indices {
            if i >= Self::MAX_PORTS {
                return Err(Error::domain(format!("port index {i} out of range")));
            }
            bits |= 1 << i;
        }
        Ok(PortSet(bits))
    }

    pub fn contains(&self, index: usize) -> bool {
        index < Self::MAX_PORTS && self.0 & (1 << index) != 0
    }

    pub fn union(self, other: PortSet) -> PortSet {
        PortSet(self.0 | other.0)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..Self::MAX_PORTS).filter(|&i| self.contains(i))
    }

    /// Highest referenced index + 1 (0 for the empty set).
    fn span(&self) -> usize {
        Self::MAX_PORTS - self.0.leading_zeros() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventLabel {
    Cool,
    Disconnect,
    LaserFire,
    Interrogate,
}

/// From `time_s` onward, exactly the ports in `active` are connected.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub time_s: f64,
    pub active: PortSet,
    pub labels: Vec<EventLabel>,
}

impl SwitchEvent {
    pub fn has(&self, label: EventLabel) -> bool {
        self.labels.contains(&label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSchedule {
    events: Vec<SwitchEvent>,
    end_s: f64,
}

impl SwitchSchedule {
    /// Events must start at `t = 0` and be strictly increasing in time.
    /// An empty schedule keeps every port connected throughout.
    pub fn new(events: Vec<SwitchEvent>, end_s: f64) -> Result<Self> {
        ensure_non_negative("schedule end", end_s)?;
        if let Some(first) = events.first() {
            if first.time_s != 0.0 {
                return Err(Error::domain(format!(
                    "first switch event must be at t = 0, got {}",
                    first.time_s
                )));
            }
        }
        for w in events.windows(2) {
            if !(w[1].time_s > w[0].time_s) {
                return Err(Error::domain(format!(
                    "switch event times must be strictly increasing ({} then {})",
                    w[0].time_s, w[1].time_s
                )));
            }
        }
        if events.iter().any(|e| !e.time_s.is_finite()) {
            return Err(Error::domain("switch event times must be finite"));
        }
        Ok(SwitchSchedule { events, end_s })
    }

    pub fn events(&self) -> &[SwitchEvent] {
        &self.events
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn times_of(&self, label: EventLabel) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.has(label))
            .map(|e| e.time_s)
            .collect()
    }

    fn validate_for(&self, baths: &BathSet) -> Result<()> {
        let n = baths.ports().len();
        for e in &self.events {
            if e.active.span() > n {
                return Err(Error::domain(format!(
                    "event at {} s references port {} but only {n} ports exist",
                    e.time_s,
                    e.active.span() - 1
                )));
            }
        }
        Ok(())
    }

    /// Distinct port configurations visited, in order of first use.
    fn configurations(&self, n_ports: usize) -> Vec<PortSet> {
        if self.events.is_empty() {
            return vec![PortSet::all(n_ports)];
        }
        let mut out: Vec<PortSet> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.active) {
                out.push(e.active);
            }
        }
        out
    }

    /// Active set at time `t` (events take effect at their own time).
    pub fn active_at(&self, t: f64, n_ports: usize) -> PortSet {
        self.events
            .iter()
            .rev()
            .find(|e| e.time_s <= t)
            .map(|e| e.active)
            .unwrap_or_else(|| PortSet::all(n_ports))
    }
}

/// Timing of the cool / disconnect / interrogate protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolTiming {
    pub cool_duration_s: f64,
    pub interrogate_delay_s: f64,
    pub trace_length_s: f64,
}

impl Default for ProtocolTiming {
    fn default() -> Self {
        ProtocolTiming {
            cool_duration_s: 40e-6,
            interrogate_delay_s: 0.0,
            trace_length_s: 400e-6,
        }
    }
}

impl ProtocolTiming {
    pub fn disconnect_time_s(&self) -> f64 {
        self.cool_duration_s
    }
}

/// Builds the three-step schedule: cool with `cooling ∪ monitoring`
/// connected, then disconnect the cooling ports (coincident with the laser
/// trigger), then interrogate after `interrogate_delay_s`.
///
/// Coincident steps are merged into one event carrying several labels.
pub fn build_protocol(
    timing: &ProtocolTiming,
    cooling: PortSet,
    monitoring: PortSet,
) -> Result<SwitchSchedule> {
    ensure_non_negative("cool duration", timing.cool_duration_s)?;
    ensure_non_negative("interrogate delay", timing.interrogate_delay_s)?;
    ensure_positive("trace length", timing.trace_length_s)?;
    let t_disconnect = timing.cool_duration_s;
    let t_interrogate = t_disconnect + timing.interrogate_delay_s;
    if t_interrogate > timing.trace_length_s {
        return Err(Error::domain(
            "protocol steps extend past the end of the trace",
        ));
    }

    let cool = SwitchEvent {
        time_s: 0.0,
        active: cooling.union(monitoring),
        labels: vec![EventLabel::Cool],
    };
    let disconnect = SwitchEvent {
        time_s: t_disconnect,
        active: monitoring,
        labels: vec![EventLabel::Disconnect, EventLabel::LaserFire],
    };
    let interrogate = SwitchEvent {
        time_s: t_interrogate,
        active: monitoring,
        labels: vec![EventLabel::Interrogate],
    };

    let mut events: Vec<SwitchEvent> = Vec::with_capacity(3);
    for e in [cool, disconnect, interrogate] {
        match events.last_mut() {
            Some(last) if last.time_s == e.time_s => {
                last.active = e.active;
                last.labels.extend(e.labels);
            }
            _ => events.push(e),
        }
    }
    SwitchSchedule::new(events, timing.trace_length_s)
}

/// Total energy decay rate `ω·(1 + Σκ_active)/Q0`, in 1/s.
pub fn relaxation_rate(mode: &CavityMode, baths: &BathSet, active: PortSet) -> f64 {
    let coupling: f64 = baths
        .ports()
        .iter()
        .enumerate()
        .filter(|(i, _)| active.contains(*i))
        .map(|(_, p)| p.coupling())
        .sum();
    mode.angular_frequency() * (1.0 + coupling) / mode.intrinsic_q()
}

/// Fixed point `q* = ε·T_mode` of the rate equation for the active ports.
pub fn steady_state_occupancy(mode: &CavityMode, baths: &BathSet, active: PortSet) -> Result<f64> {
    let t = mode_temperature(&baths.subset(|i| active.contains(i)))?;
    Ok(mode.epsilon() * t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_end_s: f64,
    pub dt_s: f64,
}

impl TimeGrid {
    fn len(&self) -> usize {
        (self.t_end_s / self.dt_s + 1e-9).floor() as usize + 1
    }
}

/// Mean photon number (and the corresponding Planck temperature) on a
/// uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonTrajectory {
    pub times_s: Vec<f64>,
    pub occupancy: Vec<f64>,
    pub temperature_k: Vec<f64>,
}

impl PhotonTrajectory {
    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn end_s(&self) -> f64 {
        self.times_s.last().copied().unwrap_or(0.0)
    }

    /// Linear interpolation of the mode temperature at `t`, clamped to the
    /// trajectory's span.
    pub fn temperature_at(&self, t: f64) -> f64 {
        interpolate(&self.times_s, &self.temperature_k, t)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.len() {
        0 => f64::NAN,
        1 => ys[0],
        n => {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[n - 1] {
                return ys[n - 1];
            }
            let i = xs.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
            let f = (x - xs[i]) / (xs[i + 1] - xs[i]);
            ys[i] + f * (ys[i + 1] - ys[i])
        }
    }
}

/// Rate and fixed point of one constant configuration.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start_s: f64,
    rate: f64,
    target: f64,
}

fn segments(mode: &CavityMode, baths: &BathSet, schedule: &SwitchSchedule) -> Result<Vec<Segment>> {
    let n = baths.ports().len();
    if schedule.events().is_empty() {
        let all = PortSet::all(n);
        return Ok(vec![Segment {
            start_s: 0.0,
            rate: relaxation_rate(mode, baths, all),
            target: steady_state_occupancy(mode, baths, all)?,
        }]);
    }
    schedule
        .events()
        .iter()
        .map(|e| {
            Ok(Segment {
                start_s: e.time_s,
                rate: relaxation_rate(mode, baths, e.active),
                target: steady_state_occupancy(mode, baths, e.active)?,
            })
        })
        .collect()
}

fn check_inputs(
    mode: &CavityMode,
    baths: &BathSet,
    schedule: &SwitchSchedule,
    grid: &TimeGrid,
    q_initial: f64,
) -> Result<()> {
    ensure_positive("time step", grid.dt_s)?;
    ensure_non_negative("end time", grid.t_end_s)?;
    ensure_non_negative("initial occupancy", q_initial)?;
    schedule.validate_for(baths)?;
    let fastest = schedule
        .configurations(baths.ports().len())
        .into_iter()
        .map(|c| relaxation_rate(mode, baths, c))
        .fold(0.0, f64::max);
    let required = 0.1 / fastest;
    if grid.dt_s > required {
        return Err(Error::StepTooCoarse {
            dt_s: grid.dt_s,
            required_dt_s: required,
        });
    }
    Ok(())
}

fn finish(mode: &CavityMode, times_s: Vec<f64>, occupancy: Vec<f64>) -> Result<PhotonTrajectory> {
    let f = mode.frequency_hz();
    let temperature_k = occupancy
        .iter()
        .map(|&q| temperature_from_occupancy(f, q.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhotonTrajectory {
        times_s,
        occupancy,
        temperature_k,
    })
}

/// Exact piecewise-exponential solution of the rate equation.
///
/// `grid.dt_s` must resolve the fastest configuration visited
/// (`dt ≤ τ_min/10`), otherwise [`Error::StepTooCoarse`] reports the
/// required step.
pub fn evolve_occupancy(
    mode: &CavityMode,
    baths: &BathSet,
    schedule: &SwitchSchedule,
    grid: &TimeGrid,
    q_initial: f64,
) -> Result<PhotonTrajectory> {
    check_inputs(mode, baths, schedule, grid, q_initial)?;
    let segs = segments(mode, baths, schedule)?;
    let n = grid.len();
    let mut times = Vec::with_capacity(n);
    let mut occ = Vec::with_capacity(n);

    let mut seg = 0;
    let mut q_start = q_initial;
    for k in 0..n {
        let t = k as f64 * grid.dt_s;
        while seg + 1 < segs.len() && segs[seg + 1].start_s <= t {
            let s = &segs[seg];
            let span = segs[seg + 1].start_s - s.start_s;
            q_start = s.target + (q_start - s.target) * (-s.rate * span).exp();
            seg += 1;
        }
        let s = &segs[seg];
        times.push(t);
        occ.push(s.target + (q_start - s.target) * (-s.rate * (t - s.start_s)).exp());
    }
    finish(mode, times, occ)
}

/// Classical RK4 integration of the same rate equation. Steps are split at
/// switch events so that every step sees a single configuration.
pub fn integrate_occupancy_rk4(
    mode: &CavityMode,
    baths: &BathSet,
    schedule: &SwitchSchedule,
    grid: &TimeGrid,
    q_initial: f64,
) -> Result<PhotonTrajectory> {
    check_inputs(mode, baths, schedule, grid, q_initial)?;
    let segs = segments(mode, baths, schedule)?;
    let n = grid.len();
    let mut times = Vec::with_capacity(n);
    let mut occ = Vec::with_capacity(n);

    let rk4 = |q: f64, h: f64, s: &Segment| {
        let f = |q: f64| -s.rate * (q - s.target);
        let k1 = f(q);
        let k2 = f(q + 0.5 * h * k1);
        let k3 = f(q + 0.5 * h * k2);
        let k4 = f(q + h * k3);
        q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };

    let mut q = q_initial;
    let mut t = 0.0;
    let mut seg = 0;
    times.push(0.0);
    occ.push(q);
    for k in 1..n {
        let t_next = k as f64 * grid.dt_s;
        while t < t_next {
            while seg + 1 < segs.len() && segs[seg + 1].start_s <= t {
                seg += 1;
            }
            let boundary = segs.get(seg + 1).map_or(f64::INFINITY, |s| s.start_s);
            let t_stop = t_next.min(boundary);
            q = rk4(q, t_stop - t, &segs[seg]);
            t = t_stop;
        }
        times.push(t_next);
        occ.push(q);
    }
    finish(mode, times, occ)
}
