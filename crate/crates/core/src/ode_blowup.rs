//! Blow-up of `I'' + I' = C₀ I^{1+α} / (1+t)^β`.
//!
//! The equality ODE is the slowest member of the differential-inequality
//! family `I'' + I' ≥ C₀ I^{1+α}/(1+t)^β`, so its blow-up time is the
//! family's extremal lifespan. Dropping `I''` gives a separable first-order
//! problem with a closed-form blow-up time, used as an oracle.

use std::fmt;

use crate::error::{Error, Result};
use crate::wave::{detect_blowup, BlowupPolicy, BlowupRate, BlowupStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeParams {
    pub alpha: f64,
    pub beta: f64,
    pub c0: f64,
    pub i0: f64,
    pub i0_prime: f64,
}

impl OdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("beta", format!("must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::invalid("c0", format!("must be positive, got {}", self.c0)));
        }
        if !(self.i0 > 0.0 && self.i0.is_finite()) {
            return Err(Error::invalid("i0", format!("must be positive, got {}", self.i0)));
        }
        if !(self.i0_prime >= 0.0 && self.i0_prime.is_finite()) {
            return Err(Error::invalid("i0_prime", format!("must be nonnegative, got {}", self.i0_prime)));
        }
        Ok(())
    }

    fn source(&self, t: f64, i: f64) -> f64 {
        self.c0 * i.abs().powf(1.0 + self.alpha) / (1.0 + t).powf(self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OdeMode {
    /// `I'' + I' = C₀ I^{1+α}/(1+t)^β`.
    #[default]
    SecondOrder,
    /// `I' = C₀ I^{1+α}/(1+t)^β`.
    FirstOrder,
}

impl OdeMode {
    /// Blow-up rate: `I ~ (T − t)^{−2/α}` with inertia, `(T − t)^{−1/α}`
    /// without.
    fn rate(self) -> BlowupRate {
        match self {
            OdeMode::SecondOrder => BlowupRate::Hyperbolic,
            OdeMode::FirstOrder => BlowupRate::Parabolic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStatus {
    BlewUp,
    HorizonReached,
    /// The step controller fell below its floor before either outcome.
    StepUnderflow,
}

impl OdeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OdeStatus::BlewUp => "blew_up",
            OdeStatus::HorizonReached => "horizon_reached",
            OdeStatus::StepUnderflow => "step_underflow",
        }
    }
}

impl fmt::Display for OdeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub horizon: f64,
    /// Mixed relative/absolute local error tolerance per step.
    pub tol: f64,
    /// `I` above this ends the run as blown up.
    pub threshold: f64,
    /// Samples used by the blow-up extrapolation.
    pub window: usize,
    pub initial_step: f64,
    /// Step floor relative to `max(1, t)`.
    pub min_step: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            horizon: 1e6,
            tol: 1e-8,
            threshold: 1e12,
            window: 8,
            initial_step: 1e-3,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceReport {
    pub tol: f64,
    pub rejected_steps: usize,
    /// Largest accepted scaled error estimate (≤ 1 by construction).
    pub max_scaled_error: f64,
    pub min_step: f64,
    /// Relative residual of the blow-up extrapolation fit.
    pub extrapolation_residual: f64,
    /// False when the rate fit was rejected and the threshold crossing
    /// time stands in for the blow-up time.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeResult {
    pub status: OdeStatus,
    /// Extrapolated blow-up time, present iff `status == BlewUp`.
    pub t_blowup: Option<f64>,
    pub steps: usize,
    pub tolerance: ToleranceReport,
    /// Accepted samples `(t, I, I')`.
    pub trajectory: Vec<(f64, f64, f64)>,
}

type State = [f64; 2];

fn rhs(params: &OdeParams, mode: OdeMode, t: f64, y: State) -> State {
    match mode {
        OdeMode::SecondOrder => [y[1], params.source(t, y[0]) - y[1]],
        OdeMode::FirstOrder => [params.source(t, y[0]), 0.0],
    }
}

fn rk4(params: &OdeParams, mode: OdeMode, t: f64, y: State, h: f64) -> State {
    let add = |y: State, k: State, c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
    let k1 = rhs(params, mode, t, y);
    let k2 = rhs(params, mode, t + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = rhs(params, mode, t + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = rhs(params, mode, t + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Integrates until `I` exceeds the threshold, the horizon or step underflow.
/// Steps are controlled by step doubling: a full RK4 step is compared with
/// two half steps and the Richardson-corrected result is kept.
pub fn integrate(params: &OdeParams, mode: OdeMode, config: &OdeConfig) -> Result<OdeResult> {
    params.validate()?;
    if !(config.tol > 0.0 && config.horizon > 0.0 && config.initial_step > 0.0) {
        return Err(Error::invalid("config", "tolerance, horizon and initial step must be positive"));
    }
    let first_slope = match mode {
        OdeMode::SecondOrder => params.i0_prime,
        OdeMode::FirstOrder => params.source(0.0, params.i0),
    };
    let mut t = 0.0;
    let mut y: State = [params.i0, params.i0_prime];
    let mut h = config.initial_step.min(config.horizon);
    let mut trajectory = vec![(0.0, params.i0, first_slope)];
    let mut report = ToleranceReport {
        tol: config.tol,
        rejected_steps: 0,
        max_scaled_error: 0.0,
        min_step: f64::INFINITY,
        extrapolation_residual: f64::NAN,
        extrapolated: false,
    };
    let components = if mode == OdeMode::SecondOrder { 2 } else { 1 };

    let status = loop {
        if y[0] > config.threshold {
            break OdeStatus::BlewUp;
        }
        if t >= config.horizon {
            break OdeStatus::HorizonReached;
        }
        if h < config.min_step * t.max(1.0) {
            break OdeStatus::StepUnderflow;
        }
        let step = h.min(config.horizon - t);
        let full = rk4(params, mode, t, y, step);
        let half = rk4(params, mode, t, y, 0.5 * step);
        let two_halves = rk4(params, mode, t + 0.5 * step, half, 0.5 * step);
        let mut scaled: f64 = 0.0;
        for c in 0..components {
            let err = (two_halves[c] - full[c]).abs() / 15.0;
            let scale = config.tol * (1.0 + two_halves[c].abs().max(y[c].abs()));
            scaled = scaled.max(err / scale);
        }
        if !scaled.is_finite() {
            report.rejected_steps += 1;
            h = 0.25 * step;
            continue;
        }
        if scaled <= 1.0 {
            t += step;
            for c in 0..2 {
                y[c] = two_halves[c] + (two_halves[c] - full[c]) / 15.0;
            }
            let slope = match mode {
                OdeMode::SecondOrder => y[1],
                OdeMode::FirstOrder => params.source(t, y[0]),
            };
            trajectory.push((t, y[0], slope));
            report.max_scaled_error = report.max_scaled_error.max(scaled);
            report.min_step = report.min_step.min(step);
        } else {
            report.rejected_steps += 1;
        }
        let factor = if scaled == 0.0 { 4.0 } else { (0.9 * scaled.powf(-0.2)).clamp(0.2, 4.0) };
        h = step * factor;
    };

    let mut t_blowup = None;
    let mut status = status;
    // Fast rates such as I ~ (T − t)^{−1/2} reach the threshold only within
    // f64 resolution of T; a step underflow while I still grows is then
    // treated like a threshold crossing if the rate fit accepts it.
    let growing = trajectory.len() > config.window && y[0] > 2.0 * params.i0;
    if status == OdeStatus::BlewUp || (status == OdeStatus::StepUnderflow && growing) {
        let history: Vec<(f64, f64)> = trajectory.iter().map(|s| (s.0, s.1)).collect();
        let guard = if status == OdeStatus::BlewUp { config.threshold } else { params.i0 };
        let policy = BlowupPolicy {
            guard,
            window: config.window,
            max_relative_residual: 0.1,
            rate: mode.rate(),
        };
        let fit = detect_blowup(&history, 1.0 + params.alpha, &policy);
        report.extrapolation_residual = fit.residual;
        if fit.status == BlowupStatus::BlewUp {
            t_blowup = fit.t_est;
            report.extrapolated = true;
            status = OdeStatus::BlewUp;
        } else if status == OdeStatus::BlewUp {
            // the rate fit was rejected; the threshold crossing time is a
            // lower estimate of the blow-up time
            t_blowup = Some(t);
        }
    }
    Ok(OdeResult {
        status,
        t_blowup,
        steps: trajectory.len() - 1,
        tolerance: report,
        trajectory,
    })
}

/// Exact blow-up time of `I' = C₀ I^{1+α}/(1+t)^β`, `I(0) = I0`:
/// `exp(I0^{−α}/(αC₀)) − 1` for `β = 1`, otherwise
/// `((1−β) I0^{−α}/(αC₀) + 1)^{1/(1−β)} − 1`.
pub fn first_order_reference(params: &OdeParams) -> Result<f64> {
    params.validate()?;
    let budget = params.i0.powf(-params.alpha) / (params.alpha * params.c0);
    Ok(if params.beta == 1.0 {
        budget.exp_m1()
    } else {
        let k = 1.0 - params.beta;
        ((k * budget).ln_1p() / k).exp_m1()
    })
}

/// One integration per `ε = I0`, ordered by decreasing `ε`.
pub fn sweep(
    template: &OdeParams,
    mode: OdeMode,
    epsilons: &[f64],
    config: &OdeConfig,
) -> Result<Vec<(f64, OdeResult)>> {
    let mut eps: Vec<f64> = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.into_iter()
        .map(|e| {
            let params = OdeParams { i0: e, ..*template };
            integrate(&params, mode, config).map(|r| (e, r))
        })
        .collect()
}
