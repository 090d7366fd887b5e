//! Damped least-squares fits of `y(t) = a1·e^(−t/τ1) + a2·e^(−t/τ2)`.

use nalgebra::{DMatrix, DVector, Matrix4};

use crate::error::{Error, Result};

use super::DeltaPPoint;

const MAX_ITERATIONS: usize = 500;
const RELATIVE_TOLERANCE: f64 = 1e-10;
/// Fits closer than this in relative time constant are reported as one
/// exponential.
const MERGE_TOLERANCE: f64 = 0.05;
/// Jacobian condition number above which a two-term fit is collapsed.
const COLLAPSE_CONDITION: f64 = 1e8;
/// Jacobian condition number above which any fit is rank deficient.
const SINGULAR_CONDITION: f64 = 1e12;
const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitErrors {
    pub a1_db: f64,
    pub a2_db: f64,
    pub tau1_s: f64,
    pub tau2_s: f64,
}

/// Result of [`fit_biexponential`]. `tau1_s <= tau2_s`; `tau2_s` is the
/// warm-up time. A collapsed single-exponential fit has `a1_db = 0` and
/// `tau1_s = tau2_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiExpFit {
    pub a1_db: f64,
    pub a2_db: f64,
    pub tau1_s: f64,
    pub tau2_s: f64,
    pub standard_errors: FitErrors,
    /// Parameter covariance in the order (a1, a2, τ1, τ2), SI units.
    pub covariance: Matrix4<f64>,
    /// `sqrt(Σ r²)`.
    pub residual_norm: f64,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub single_exponential: bool,
    pub points: usize,
}

impl BiExpFit {
    pub fn warm_up_time_s(&self) -> f64 {
        self.tau2_s
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let term = |a: f64, tau: f64| if a == 0.0 { 0.0 } else { a * (-t / tau).exp() };
        term(self.a1_db, self.tau1_s) + term(self.a2_db, self.tau2_s)
    }
}

struct Outcome {
    params: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn cost_of(model: &dyn Fn(&[f64], f64) -> f64, p: &[f64], u: &[f64], y: &[f64]) -> f64 {
    0.5 * u
        .iter()
        .zip(y)
        .map(|(&ui, &yi)| (yi - model(p, ui)).powi(2))
        .sum::<f64>()
}

fn jacobian(model: &dyn Fn(&[f64], f64) -> f64, p: &[f64], u: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(u.len(), p.len());
    let mut pp = p.to_vec();
    for c in 0..p.len() {
        let h = 1e-6 * p[c].abs().max(1e-3);
        pp[c] = p[c] + h;
        let plus: Vec<f64> = u.iter().map(|&ui| model(&pp, ui)).collect();
        pp[c] = p[c] - h;
        for (r, &ui) in u.iter().enumerate() {
            j[(r, c)] = (plus[r] - model(&pp, ui)) / (2.0 * h);
        }
        pp[c] = p[c];
    }
    j
}

/// Levenberg–Marquardt with diagonal (Marquardt) damping. Steps that leave
/// the admissible region or raise the cost are rejected and the damping
/// raised.
fn levenberg_marquardt(
    model: &dyn Fn(&[f64], f64) -> f64,
    admissible: &dyn Fn(&[f64]) -> bool,
    u: &[f64],
    y: &[f64],
    p0: Vec<f64>,
) -> Outcome {
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut p = p0;
    let mut cost = cost_of(model, &p, u, y);
    let mut damping = 1e-3;
    for iteration in 1..=MAX_ITERATIONS {
        let j = jacobian(model, &p, u);
        let r = DVector::from_iterator(u.len(), u.iter().zip(y).map(|(&ui, &yi)| yi - model(&p, ui)));
        let jtj = j.transpose() * &j;
        let g = j.transpose() * r;
        let diag_floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);

        let mut accepted = false;
        while damping < 1e16 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += damping * jtj[(k, k)].max(diag_floor);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if !admissible(&trial) {
                damping *= 10.0;
                continue;
            }
            let trial_cost = cost_of(model, &trial, u, y);
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                p = trial;
                cost = trial_cost;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if rel < RELATIVE_TOLERANCE || cost <= 1e-30 * scale {
                    return Outcome { params: p, cost, iterations: iteration, converged: true };
                }
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            return Outcome { params: p, cost, iterations: iteration, converged: true };
        }
    }
    Outcome { params: p, cost, iterations: MAX_ITERATIONS, converged: false }
}

fn bi_model(p: &[f64], u: f64) -> f64 {
    p[0] * (-u / p[2]).exp() + p[1] * (-u / p[3]).exp()
}

fn single_model(p: &[f64], u: f64) -> f64 {
    p[0] * (-u / p[1]).exp()
}

/// Condition number and `(JᵀJ)⁻¹` of the Jacobian.
fn conditioned_inverse(j: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let svd = j.clone().svd(false, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    let s_min = s.min();
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    let v_t = svd.v_t.expect("requested V");
    let n = s.len();
    let mut inv = DMatrix::zeros(n, n);
    if cond.is_finite() {
        for k in 0..n {
            let row = v_t.row(k);
            inv += row.transpose() * row / (s[k] * s[k]);
        }
    }
    (cond, inv)
}

/// Amplitudes minimising the squared error for fixed time constants.
fn linear_amplitudes(u: &[f64], y: &[f64], s: [f64; 2]) -> [f64; 2] {
    let basis = |k: usize, ui: f64| (-ui / s[k]).exp();
    let mut m = [[0.0; 2]; 2];
    let mut b = [0.0; 2];
    for (&ui, &yi) in u.iter().zip(y) {
        let e = [basis(0, ui), basis(1, ui)];
        for (r, row) in m.iter_mut().enumerate() {
            b[r] += e[r] * yi;
            for (c, cell) in row.iter_mut().enumerate() {
                *cell += e[r] * e[c];
            }
        }
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= 1e-14 * m[0][0] * m[1][1] {
        return [y[0], 0.0];
    }
    [
        (b[0] * m[1][1] - b[1] * m[0][1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ]
}

fn select_points(times_s: &[f64], values: &[f64], exclude_before_s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if times_s.len() != values.len() {
        return Err(Error::domain("times and values differ in length"));
    }
    let (t, y): (Vec<f64>, Vec<f64>) = times_s
        .iter()
        .zip(values)
        .filter(|(t, y)| **t >= exclude_before_s && t.is_finite() && y.is_finite())
        .map(|(t, y)| (*t, *y))
        .unzip();
    if t.len() < MIN_POINTS {
        return Err(Error::domain(format!(
            "{} points remain after exclusion; at least {MIN_POINTS} are needed",
            t.len()
        )));
    }
    if !(t.iter().cloned().fold(0.0, f64::max) > 0.0) {
        return Err(Error::domain("fit times must extend past zero"));
    }
    Ok((t, y))
}

/// Fits `a·e^(−t/τ)`. Rank deficiency (e.g. all-zero data) is an error.
pub fn fit_single_exponential(times_s: &[f64], values: &[f64], exclude_before_s: f64) -> Result<BiExpFit> {
    let (t, y) = select_points(times_s, values, exclude_before_s)?;
    let span = t.iter().cloned().fold(0.0, f64::max);
    let u: Vec<f64> = t.iter().map(|ti| ti / span).collect();
    let guess = single_guess(&u, &y);
    single_fit(&u, &y, span, guess)
}

/// Log-linear estimate from the first and last thirds of the data.
fn single_guess(u: &[f64], y: &[f64]) -> [f64; 2] {
    let n = u.len();
    let third = (n / 3).max(1);
    let avg = |r: std::ops::Range<usize>| {
        let len = r.len() as f64;
        let (su, sy) = r.fold((0.0, 0.0), |(a, b), k| (a + u[k], b + y[k]));
        (su / len, sy / len)
    };
    let (u0, y0) = avg(0..third);
    let (u1, y1) = avg(n - third..n);
    let s = if y0 * y1 > 0.0 && y0.abs() > y1.abs() {
        (u1 - u0) / (y0 / y1).ln()
    } else {
        0.3
    };
    let s = s.clamp(1e-3, 1e3);
    [y0 * (u0 / s).exp(), s]
}

fn single_fit(u: &[f64], y: &[f64], span: f64, guess: [f64; 2]) -> Result<BiExpFit> {
    let out = levenberg_marquardt(&single_model, &|p| p[1] > 0.0 && p[1].is_finite(), u, y, guess.to_vec());
    let j = jacobian(&single_model, &out.params, u);
    let (cond, inv) = conditioned_inverse(&j);
    if !(cond < SINGULAR_CONDITION) {
        return Err(Error::DegenerateFit(format!(
            "single-exponential Jacobian is rank deficient (condition {cond:e})"
        )));
    }
    let dof = (u.len() - 2) as f64;
    let s2 = 2.0 * out.cost / dof;
    let (a, s) = (out.params[0], out.params[1]);
    let mut cov = Matrix4::zeros();
    let units = [1.0, span];
    let slots = [1, 3];
    for r in 0..2 {
        for c in 0..2 {
            cov[(slots[r], slots[c])] = s2 * inv[(r, c)] * units[r] * units[c];
        }
    }
    cov[(2, 2)] = cov[(3, 3)];
    let residuals = residuals(&single_model, &out.params, u, y);
    Ok(BiExpFit {
        a1_db: 0.0,
        a2_db: a,
        tau1_s: s * span,
        tau2_s: s * span,
        standard_errors: FitErrors {
            a1_db: 0.0,
            a2_db: cov[(1, 1)].sqrt(),
            tau1_s: cov[(3, 3)].sqrt(),
            tau2_s: cov[(3, 3)].sqrt(),
        },
        covariance: cov,
        residual_norm: (2.0 * out.cost).sqrt(),
        residuals,
        converged: out.converged,
        iterations: out.iterations,
        single_exponential: true,
        points: u.len(),
    })
}

fn residuals(model: &dyn Fn(&[f64], f64) -> f64, p: &[f64], u: &[f64], y: &[f64]) -> Vec<f64> {
    u.iter().zip(y).map(|(&ui, &yi)| yi - model(p, ui)).collect()
}

/// Bi-exponential fit to the points with `t >= exclude_before_s`.
///
/// Time constants start at 0.1 and 1 times the series span, amplitudes
/// from linear least squares. If the two time constants end within 5 %,
/// one amplitude vanishes, the fast constant is shorter than the point
/// spacing, the Jacobian is nearly singular, or the solver
/// runs out of iterations with the constants within 10 %, the result
/// is a single-exponential refit with `single_exponential` set. Running
/// out of iterations yields `converged = false` with the last parameters.
pub fn fit_biexponential(times_s: &[f64], values: &[f64], exclude_before_s: f64) -> Result<BiExpFit> {
    let (t, y) = select_points(times_s, values, exclude_before_s)?;
    let span = t.iter().cloned().fold(0.0, f64::max);
    let u: Vec<f64> = t.iter().map(|ti| ti / span).collect();

    let s0 = [0.1, 1.0];
    let a0 = linear_amplitudes(&u, &y, s0);
    let admissible = |p: &[f64]| p[2] > 0.0 && p[3] > 0.0 && p[2].is_finite() && p[3].is_finite();
    let out = levenberg_marquardt(&bi_model, &admissible, &u, &y, vec![a0[0], a0[1], s0[0], s0[1]]);

    let mut p = out.params.clone();
    if p[2] > p[3] {
        p.swap(0, 1);
        p.swap(2, 3);
    }
    let j = jacobian(&bi_model, &p, &u);
    let (cond, inv) = conditioned_inverse(&j);
    let a_max = p[0].abs().max(p[1].abs());
    let separation = (p[3] - p[2]) / p[3];
    let spacing = (u[u.len() - 1] - u[0]) / (u.len() - 1) as f64;
    // Running out of iterations between nearly equal constants means the
    // solver is drifting along the degenerate valley.
    let collapse = separation < MERGE_TOLERANCE
        || (!out.converged && separation < 2.0 * MERGE_TOLERANCE)
        || p[0].abs().min(p[1].abs()) <= 1e-6 * a_max
        || p[2] < spacing
        || !(cond < COLLAPSE_CONDITION);
    if collapse {
        log::debug!("bi-exponential fit collapsed to one term (condition {cond:e})");
        // Restart from the dominant term, the slow term and the log-linear
        // estimate; keep the best of the fits that are not rank deficient.
        let dominant = if p[0].abs() > p[1].abs() { 2 } else { 3 };
        let mut guesses = vec![single_guess(&u, &y)];
        let usable = |s: f64| s.is_finite() && s >= spacing && s < 1e3;
        if a_max > 0.0 && usable(p[dominant]) {
            guesses.push([p[0] + p[1], p[dominant]]);
        }
        if p[1] != 0.0 && usable(p[3]) {
            guesses.push([p[1], p[3]]);
        }
        let mut best: Option<Result<BiExpFit>> = None;
        for guess in guesses {
            let fit = single_fit(&u, &y, span, guess);
            best = match (best, fit) {
                (None, f) => Some(f),
                (Some(Ok(b)), Ok(f)) if f.residual_norm < b.residual_norm => Some(Ok(f)),
                (Some(Err(_)), Ok(f)) => Some(Ok(f)),
                (b, _) => b,
            };
        }
        return best.expect("at least one guess");
    }

    let dof = (u.len() - 4) as f64;
    let s2 = 2.0 * out.cost / dof;
    let units = [1.0, 1.0, span, span];
    let mut cov = Matrix4::zeros();
    for r in 0..4 {
        for c in 0..4 {
            cov[(r, c)] = s2 * inv[(r, c)] * units[r] * units[c];
        }
    }
    Ok(BiExpFit {
        a1_db: p[0],
        a2_db: p[1],
        tau1_s: p[2] * span,
        tau2_s: p[3] * span,
        standard_errors: FitErrors {
            a1_db: cov[(0, 0)].sqrt(),
            a2_db: cov[(1, 1)].sqrt(),
            tau1_s: cov[(2, 2)].sqrt(),
            tau2_s: cov[(3, 3)].sqrt(),
        },
        covariance: cov,
        residual_norm: (2.0 * out.cost).sqrt(),
        residuals: residuals(&bi_model, &p, &u, &y),
        converged: out.converged,
        iterations: out.iterations,
        single_exponential: false,
        points: u.len(),
    })
}

/// Fits a windowed ΔP series, skipping windows without a value.
pub fn fit_deltap_series(series: &[DeltaPPoint], exclude_before_s: f64) -> Result<BiExpFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter_map(|p| p.delta_p_db.map(|v| (p.time_s, v)))
        .unzip();
    fit_biexponential(&t, &y, exclude_before_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingDepth {
    pub delta_p_db: f64,
    pub standard_error_db: f64,
}

/// The fitted model at `t = 0`: `a1 + a2`, with the standard error from the
/// amplitude covariance.
pub fn cooling_depth_from_fit(fit: &BiExpFit) -> Result<CoolingDepth> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let c = &fit.covariance;
    let var = c[(0, 0)] + c[(1, 1)] + 2.0 * c[(0, 1)];
    Ok(CoolingDepth {
        delta_p_db: fit.a1_db + fit.a2_db,
        standard_error_db: var.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| (k as f64 + 0.5) * dt).collect()
    }

    #[test]
    fn noiseless_single_exponential_is_exact() {
        let t = grid(60, 1e-6);
        let y: Vec<f64> = t.iter().map(|t| -3.5 * (-t / 9e-6).exp()).collect();
        let fit = fit_biexponential(&t, &y, 2e-6).unwrap();
        assert!(fit.converged);
        assert!(((fit.tau2_s - 9e-6) / 9e-6).abs() < 1e-6, "{fit:?}");
        let depth = cooling_depth_from_fit(&fit).unwrap();
        assert!((depth.delta_p_db + 3.5).abs() < 1e-6);
    }

    #[test]
    fn noiseless_biexponential_is_recovered() {
        let t = grid(80, 1e-6);
        let y: Vec<f64> = t.iter().map(|t| -1.5 * (-t / 1.5e-6).exp() - 2.0 * (-t / 9e-6).exp()).collect();
        let fit = fit_biexponential(&t, &y, 0.0).unwrap();
        assert!(!fit.single_exponential);
        assert!(((fit.tau1_s - 1.5e-6) / 1.5e-6).abs() < 1e-5);
        assert!(((fit.tau2_s - 9e-6) / 9e-6).abs() < 1e-6);
        assert!((fit.a1_db + 1.5).abs() < 1e-5 && (fit.a2_db + 2.0).abs() < 1e-6);
        assert!(fit.tau1_s <= fit.tau2_s);
    }

    #[test]
    fn equal_time_constants_collapse() {
        let t = grid(50, 1e-6);
        for tau_b in [5e-6, 5.05e-6, 5.1e-6] {
            let y: Vec<f64> = t.iter().map(|t| -(-t / 5e-6).exp() - 2.0 * (-t / tau_b).exp()).collect();
            let fit = fit_biexponential(&t, &y, 0.0).unwrap();
            assert!(fit.single_exponential, "{tau_b} {fit:?}");
            assert!(fit.converged);
            assert_eq!(fit.tau1_s, fit.tau2_s);
            assert_eq!(fit.a1_db, 0.0);
            assert!((fit.tau2_s - 5e-6).abs() < 0.1e-6);
            assert!(fit.standard_errors.tau2_s >= 0.0);
        }
    }

    #[test]
    fn unresolvably_fast_term_collapses() {
        let t = grid(50, 1e-6);
        let mut y: Vec<f64> = t.iter().map(|t| -3.0 * (-t / 9e-6).exp()).collect();
        y[0] -= 5.0;
        let fit = fit_biexponential(&t, &y, 0.0).unwrap();
        assert!(fit.single_exponential, "{fit:?}");
        assert!(fit.tau2_s >= 1e-6, "{}", fit.tau2_s);
    }

    #[test]
    fn degenerate_inputs_never_panic() {
        let t = grid(20, 1e-6);
        assert!(matches!(fit_biexponential(&t, &[0.0; 20], 0.0), Err(Error::DegenerateFit(_))));
        let flat = vec![-1.0; 20];
        let _ = fit_biexponential(&t, &flat, 0.0);
        assert!(fit_biexponential(&t[..5], &[1.0; 5], 0.0).is_err());
        assert!(fit_biexponential(&t, &[1.0; 19], 0.0).is_err());
        assert!(fit_biexponential(&t, &y_with_nan(), 0.0).is_ok());
    }

    fn y_with_nan() -> Vec<f64> {
        let mut y: Vec<f64> = grid(20, 1e-6).iter().map(|t| (-t / 4e-6).exp()).collect();
        y[3] = f64::NAN;
        y
    }

    #[test]
    fn zero_amplitudes_give_zero_depth() {
        let fit = BiExpFit {
            a1_db: 0.0,
            a2_db: 0.0,
            tau1_s: 1e-6,
            tau2_s: 9e-6,
            standard_errors: FitErrors::default(),
            covariance: Matrix4::zeros(),
            residual_norm: 0.0,
            residuals: vec![],
            converged: true,
            iterations: 0,
            single_exponential: false,
            points: 0,
        };
        assert_eq!(cooling_depth_from_fit(&fit).unwrap().delta_p_db, 0.0);
        let stuck = BiExpFit { converged: false, ..fit };
        assert_eq!(cooling_depth_from_fit(&stuck), Err(Error::NotConverged));
    }

    fn noisy_series(rng: &mut ChaCha8Rng, sigma: f64) -> (Vec<f64>, Vec<f64>) {
        let t = grid(200, 0.4e-6);
        let y = t
            .iter()
            .map(|t| -(-t / 1e-6).exp() - 3.0 * (-t / 9e-6).exp() + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (t, y)
    }

    #[test]
    fn residuals_are_white_for_correct_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (t, y) = noisy_series(&mut rng, 0.05);
        let fit = fit_biexponential(&t, &y, 0.0).unwrap();
        let r = &fit.residuals;
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let c0: f64 = r.iter().map(|v| (v - m).powi(2)).sum();
        let c1: f64 = r.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        assert!((c1 / c0).abs() < 0.1);
        assert_eq!(fit.points, 200);
    }

    #[test]
    fn standard_errors_match_monte_carlo_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut depths = Vec::new();
        let mut taus = Vec::new();
        let mut reported_depth = Vec::new();
        let mut reported_tau = Vec::new();
        for _ in 0..200 {
            let (t, y) = noisy_series(&mut rng, 0.05);
            let fit = fit_biexponential(&t, &y, 0.0).unwrap();
            assert!(!fit.single_exponential);
            let d = cooling_depth_from_fit(&fit).unwrap();
            depths.push(d.delta_p_db);
            reported_depth.push(d.standard_error_db);
            taus.push(fit.tau2_s);
            reported_tau.push(fit.standard_errors.tau2_s);
        }
        let sd = |x: &[f64]| {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
        };
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let ratio = mean(&reported_depth) / sd(&depths);
        assert!((ratio - 1.0).abs() < 0.3, "depth {ratio}");
        let ratio = mean(&reported_tau) / sd(&taus);
        assert!((ratio - 1.0).abs() < 0.3, "tau {ratio}");
    }

    #[test]
    fn series_helper_skips_missing() {
        let pts: Vec<DeltaPPoint> = grid(30, 1e-6)
            .into_iter()
            .enumerate()
            .map(|(k, t)| DeltaPPoint {
                time_s: t,
                delta_p_db: if k == 4 { None } else { Some(-2.0 * (-t / 6e-6).exp()) },
            })
            .collect();
        let fit = fit_deltap_series(&pts, 2e-6).unwrap();
        assert_eq!(fit.points, 27);
        assert!(((fit.tau2_s - 6e-6) / 6e-6).abs() < 1e-6);
    }
}
