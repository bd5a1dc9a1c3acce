//! Lifespan extrapolation from the growth of `max|u|`.
//!
//! Near a blow-up time `T` the sup norm grows like `c (T − t)^{-k/(p-1)}`,
//! so `max|u|^{-(p-1)/k}` vanishes linearly at `T`. A straight-line fit over
//! the last few samples gives `T` as its root.

use std::fmt;

use crate::regression::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupStatus {
    BlewUp,
    Survived,
    Inconclusive,
}

impl BlowupStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BlowupStatus::BlewUp => "blew_up",
            BlowupStatus::Survived => "survived",
            BlowupStatus::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for BlowupStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exponent `k` in the rate `(T − t)^{-k/(p-1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupRate {
    /// `k = 1`: first-order-in-time (heat / `u' = u^p`) rate.
    Parabolic,
    /// `k = 2`: second-order-in-time (`u'' = u^p`) rate, the one the damped
    /// wave equation actually follows once `u_tt` dominates `u_t`.
    Hyperbolic,
}

impl BlowupRate {
    pub fn order(self) -> f64 {
        match self {
            BlowupRate::Parabolic => 1.0,
            BlowupRate::Hyperbolic => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupPolicy {
    /// Sup-norm threshold that ends a run as blown up.
    pub guard: f64,
    /// Number of trailing samples used in the extrapolation fit.
    pub window: usize,
    /// Largest accepted RMS fit residual relative to the span of the fitted
    /// values over the window.
    pub max_relative_residual: f64,
    pub rate: BlowupRate,
}

impl Default for BlowupPolicy {
    fn default() -> Self {
        Self {
            guard: 1e8,
            window: 8,
            max_relative_residual: 0.1,
            rate: BlowupRate::Hyperbolic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub status: BlowupStatus,
    /// Extrapolated lifespan, present iff `status == BlewUp`.
    pub t_est: Option<f64>,
    /// `(t, max|u|)` samples used by the extrapolation.
    pub window: Vec<(f64, f64)>,
    /// Relative RMS residual of the extrapolation fit (NaN when no fit ran).
    pub residual: f64,
    /// Last time the solution was resolved.
    pub last_time: f64,
}

impl BlowupReport {
    pub(crate) fn without_fit(status: BlowupStatus, last_time: f64) -> Self {
        Self {
            status,
            t_est: None,
            window: Vec::new(),
            residual: f64::NAN,
            last_time,
        }
    }
}

/// Classifies a `(t, max|u|)` history and extrapolates the lifespan.
///
/// Histories whose last sample stays below the guard are `Survived`. A
/// guarded history is `BlewUp` only when the trailing window is strictly
/// increasing, the fitted line decreases, its root lies at or after the last
/// sample and the relative residual is acceptable; otherwise `Inconclusive`.
pub fn detect_blowup(history: &[(f64, f64)], p: f64, policy: &BlowupPolicy) -> BlowupReport {
    let last_time = history.last().map_or(0.0, |s| s.0);
    let reached_guard = history.last().is_some_and(|s| s.1 > policy.guard);
    if !reached_guard {
        return BlowupReport::without_fit(BlowupStatus::Survived, last_time);
    }
    let m = policy.window.max(2);
    if history.len() < m {
        return BlowupReport::without_fit(BlowupStatus::Inconclusive, last_time);
    }
    let window = history[history.len() - m..].to_vec();
    let mut report = BlowupReport {
        status: BlowupStatus::Inconclusive,
        t_est: None,
        window,
        residual: f64::NAN,
        last_time,
    };
    let monotone = report.window.windows(2).all(|w| w[1].1 > w[0].1 && w[1].0 > w[0].0);
    if !monotone {
        return report;
    }
    let exponent = -(p - 1.0) / policy.rate.order();
    let ts: Vec<f64> = report.window.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = report.window.iter().map(|s| s.1.powf(exponent)).collect();
    let Some(fit) = linear_fit(&ts, &ys) else {
        return report;
    };
    let span = ys[0] - ys[ys.len() - 1];
    report.residual = fit.rms_residual() / span;
    if !(fit.slope < 0.0) || !(report.residual <= policy.max_relative_residual) {
        return report;
    }
    let root = -fit.intercept / fit.slope;
    if root.is_finite() && root >= last_time {
        report.status = BlowupStatus::BlewUp;
        report.t_est = Some(root);
    }
    report
}
