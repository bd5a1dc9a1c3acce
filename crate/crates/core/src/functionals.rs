//! Heat-kernel test functionals along a solver trajectory.
//!
//! With `s = t + 1` and the Gaussian weight `e^{−|x|²/4s}`:
//!
//! * `G(t) = ∫ e^{−|x|²/4s} u`, `A(t) = ∫ e^{−|x|²/4s} u_t`,
//! * `F(t) = (∫ e^{−|x|²/4s} |u|^p)^{1/p} s^{n(p−1)/2p}`,
//! * `D(t) = (4πs)^{n/2} ∫_0^t ∫ E(2t+1−τ) |u|^p dx dτ`,
//! * `B(t) = (4πs)^{n/2} ∫_0^t ∫ ∂_t E(2t+1−τ) u_t dx dτ`,
//!
//! which satisfy `G + A + B = ε (s/(2t+1))^{n/2} ∫ e^{−|x|²/4(2t+1)}(f+g) + D`
//! for solutions of the damped wave equation.
//!
//! `D` and `B` need, for every check time `t`, a pass over all earlier
//! snapshots at a `t`-dependent scale. [`FunctionalAccumulator`] does this
//! while the solver runs, so trajectories are never stored.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{sphere_area, RadialGrid};
use crate::heat_kernel::{gaussian_moments, moment, AbsPow};
use crate::wave::{ProblemSpec, SnapshotSink, SolutionSnapshot};

/// Largest snapshot spacing for which τ-integrals are trusted.
pub const MAX_CADENCE: f64 = 0.1;

fn time_tolerance(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

fn scale_exponent(dim: usize, p: f64) -> f64 {
    dim as f64 * (p - 1.0) / (2.0 * p)
}

pub fn compute_g(snapshot: &SolutionSnapshot, grid: &RadialGrid) -> f64 {
    moment(grid, snapshot.u.as_slice(), snapshot.t + 1.0, 0)
}

pub fn compute_f(snapshot: &SolutionSnapshot, grid: &RadialGrid, p: f64) -> f64 {
    let s = snapshot.t + 1.0;
    let weighted = moment(grid, &AbsPow(&snapshot.u, p), s, 0);
    weighted.powf(1.0 / p) * s.powf(scale_exponent(grid.dim(), p))
}

pub fn compute_a(snapshot: &SolutionSnapshot, grid: &RadialGrid) -> f64 {
    moment(grid, snapshot.v.as_slice(), snapshot.t + 1.0, 0)
}

/// `G ≤ (4π)^{n(p−1)/2p} F`, Hölder's inequality against the exact
/// Gaussian mass.
pub fn holder_constant(dim: usize, p: f64) -> f64 {
    (4.0 * PI).powf(scale_exponent(dim, p))
}

/// [`holder_constant`] at `p = 1 + 2/n`, i.e. `(4π)^{n/(n+2)}`. It dominates
/// the general constant for every `p ≤ 1 + 2/n`.
pub fn critical_holder_constant(dim: usize) -> f64 {
    let n = dim as f64;
    (4.0 * PI).powf(n / (n + 2.0))
}

/// `K` in `∫ e^{−|x|²/4s} |x|²|u| / (4s²) ≤ K·F/s`: Hölder with the Gaussian
/// moment `∫ e^{−|x|²/4s}|x|^{2p'} = (4s)^{p'+n/2} ω_n Γ(p' + n/2)/2`.
pub fn moment_bound_constant(dim: usize, p: f64) -> f64 {
    let q = p / (p - 1.0);
    let n = dim as f64;
    let gaussian = sphere_area(dim) * statrs::function::gamma::gamma(q + n / 2.0) / 2.0;
    4f64.powf(scale_exponent(dim, p)) * gaussian.powf(1.0 / q)
}

/// The constant the grid actually realizes in [`moment_bound_constant`] at
/// scale `s`: the same Hölder pairing with the quadrature in place of the
/// exact Gaussian moment. The difference is the quadrature slack of the
/// bound.
pub fn discrete_moment_bound_constant(grid: &RadialGrid, p: f64, s: f64) -> f64 {
    let q = p / (p - 1.0);
    let n = grid.dim() as f64;
    let dr = grid.dr();
    let weights: Vec<f64> = (0..grid.len()).map(|i| (i as f64 * dr).powf(2.0 * q)).collect();
    let discrete = moment(grid, weights.as_slice(), s, 0);
    // divide out the exact scaling (4s)^{q + n/2} that the closed form has
    let normalized = discrete / (4.0 * s).powf(q + n / 2.0);
    4f64.powf(scale_exponent(grid.dim(), p)) * normalized.powf(1.0 / q)
}

/// A τ-integral together with its trapezoid error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauIntegral {
    pub value: f64,
    /// Euler–Maclaurin estimate `h²/12·|I'(t) − I'(0)|` from end slopes.
    pub error_estimate: f64,
    /// Largest snapshot spacing, when it exceeds [`MAX_CADENCE`].
    pub coarse_cadence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelCheck {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / (1 + |rhs|)`.
    pub residual: f64,
}

/// `γ̃` on the samples from the anchor on; `values[0] = ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTilde {
    /// Anchor: the first sample time at or after the requested `t0`.
    pub t0: f64,
    /// Index of the anchor in the trace.
    pub start: usize,
    pub values: Vec<f64>,
}

impl GammaTilde {
    /// Value at trace sample `index`, if at or after the anchor.
    pub fn at(&self, index: usize) -> Option<f64> {
        index.checked_sub(self.start).and_then(|k| self.values.get(k).copied())
    }
}

/// Functional time series of one trajectory. `G`, `F`, `A` are sampled at
/// every snapshot; `B`, `D` and the Duhamel residual only at check times.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTrace {
    pub dim: usize,
    pub p: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    pub a: Vec<f64>,
    /// `∫ e^{−|x|²/4s}|x|² u / (4s²)`, the correction in `A = G' + …`.
    pub weighted_r2: Vec<f64>,
    /// As [`Self::weighted_r2`] with `|u|`.
    pub weighted_r2_abs: Vec<f64>,
    pub b: Vec<Option<TauIntegral>>,
    pub d: Vec<Option<TauIntegral>>,
    pub duhamel: Vec<Option<DuhamelCheck>>,
    pub gamma_tilde: Option<GammaTilde>,
    /// Largest snapshot spacing, when it exceeds [`MAX_CADENCE`].
    pub coarse_cadence: Option<f64>,
    /// Check times that no snapshot landed on.
    pub missed_checks: Vec<f64>,
}

impl FunctionalTrace {
    /// `2^{−n/2} ∫_0^t F^p/(1+τ) dτ` at every sample, by the same trapezoid
    /// rule as `D`. A lower bound for `D` when `p ≤ 1 + 2/n`.
    pub fn d_lower_bound(&self) -> Vec<f64> {
        let q: Vec<f64> = self
            .times
            .iter()
            .zip(&self.f)
            .map(|(t, f)| f.powf(self.p) / (1.0 + t))
            .collect();
        let factor = 2f64.powf(-(self.dim as f64) / 2.0);
        cumulative_trapezoid(&self.times, &q).into_iter().map(|v| factor * v).collect()
    }

    /// Indices that carry a full check (`B`, `D` and, with data, Duhamel).
    pub fn check_indices(&self) -> Vec<usize> {
        (0..self.times.len()).filter(|&i| self.d[i].is_some()).collect()
    }

    /// Sample index of time `t`, if one matches.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= time_tolerance(t))
    }

    /// Computes `γ̃` from the stored `F` samples.
    pub fn attach_gamma_tilde(&mut self, t0: f64) -> Result<()> {
        self.gamma_tilde = Some(compute_gamma_tilde(&self.times, &self.f, t0, self.epsilon, self.p)?);
        Ok(())
    }
}

fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut total = 0.0;
    for k in 0..values.len() {
        if k > 0 {
            total += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(total);
    }
    out
}

/// Running trapezoid state of `D` and `B` for one check time.
#[derive(Debug, Clone)]
struct Check {
    t: f64,
    d: f64,
    b: f64,
    samples: usize,
    /// `(τ, D-integrand)` at the first two samples.
    head: [(f64, f64); 2],
    /// `(τ, D-integrand, B-integrand)` at the latest sample.
    last: (f64, f64, f64),
    /// D-integrand at the sample before `last`.
    before_last: (f64, f64),
}

impl Check {
    fn new(t: f64) -> Self {
        Self {
            t,
            d: 0.0,
            b: 0.0,
            samples: 0,
            head: [(0.0, 0.0); 2],
            last: (0.0, 0.0, 0.0),
            before_last: (0.0, 0.0),
        }
    }

    fn push(&mut self, tau: f64, d_int: f64, b_int: f64) {
        if self.samples > 0 {
            let h = tau - self.last.0;
            self.d += 0.5 * h * (self.last.1 + d_int);
            self.b += 0.5 * h * (self.last.2 + b_int);
        }
        if self.samples < 2 {
            self.head[self.samples] = (tau, d_int);
        }
        self.before_last = (self.last.0, self.last.1);
        self.last = (tau, d_int, b_int);
        self.samples += 1;
    }

    fn d_error(&self) -> f64 {
        if self.samples < 3 {
            return 0.0;
        }
        let span = self.last.0 - self.head[0].0;
        let h = span / (self.samples - 1) as f64;
        let start = (self.head[1].1 - self.head[0].1) / (self.head[1].0 - self.head[0].0);
        let end = (self.last.1 - self.before_last.1) / (self.last.0 - self.before_last.0);
        h * h / 12.0 * (end - start).abs()
    }
}

/// Evaluates the functionals snapshot by snapshot.
///
/// `D` and `B` are accumulated for each planned check time; a check
/// completes when a snapshot lands on its time. With initial data attached
/// ([`Self::with_data`]) completed checks also carry the Duhamel residual.
#[derive(Debug, Clone)]
pub struct FunctionalAccumulator {
    grid: RadialGrid,
    p: f64,
    /// `ε` and `f + g`, for the Duhamel check.
    data: Option<(f64, Vec<f64>)>,
    checks: Vec<Check>,
    trace: FunctionalTrace,
    powered: Vec<f64>,
    abs_u: Vec<f64>,
}

impl FunctionalAccumulator {
    /// `checks` are sorted and deduplicated.
    pub fn new(grid: &RadialGrid, p: f64, mut checks: Vec<f64>) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::invalid("p", format!("must exceed 1, got {p}")));
        }
        if checks.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::invalid("checks", "check times must be finite and nonnegative"));
        }
        checks.sort_by(f64::total_cmp);
        checks.dedup_by(|a, b| (*a - *b).abs() <= time_tolerance(*b));
        Ok(Self {
            grid: grid.clone(),
            p,
            data: None,
            checks: checks.into_iter().map(Check::new).collect(),
            trace: FunctionalTrace {
                dim: grid.dim(),
                p,
                epsilon: 0.0,
                times: Vec::new(),
                g: Vec::new(),
                f: Vec::new(),
                a: Vec::new(),
                weighted_r2: Vec::new(),
                weighted_r2_abs: Vec::new(),
                b: Vec::new(),
                d: Vec::new(),
                duhamel: Vec::new(),
                gamma_tilde: None,
                coarse_cadence: None,
                missed_checks: Vec::new(),
            },
            powered: Vec::new(),
            abs_u: Vec::new(),
        })
    }

    /// Accumulator for the trajectory of `spec`, with Duhamel checks.
    pub fn for_problem(spec: &ProblemSpec, checks: Vec<f64>) -> Result<Self> {
        let mut acc = Self::new(spec.grid(), spec.params.p, checks)?;
        acc.with_data(spec);
        Ok(acc)
    }

    /// Attaches `ε` and `f + g` so completed checks report the Duhamel
    /// residual.
    pub fn with_data(&mut self, spec: &ProblemSpec) -> &mut Self {
        let sum: Vec<f64> = spec.f.values().iter().zip(spec.g.values()).map(|(f, g)| f + g).collect();
        self.trace.epsilon = spec.params.epsilon;
        self.data = Some((spec.params.epsilon, sum));
        self
    }

    fn ingest(&mut self, t: f64, u: &[f64], v: &[f64]) {
        let n = self.grid.dim() as f64;
        let p = self.p;
        let trace = &mut self.trace;
        if let Some(&prev) = trace.times.last() {
            let gap = t - prev;
            if gap > MAX_CADENCE * (1.0 + 1e-9) {
                let worst = trace.coarse_cadence.unwrap_or(0.0).max(gap);
                trace.coarse_cadence = Some(worst);
            }
        }
        self.powered.clear();
        self.powered.extend(u.iter().map(|x| x.abs().powf(p)));
        self.abs_u.clear();
        self.abs_u.extend(u.iter().map(|x| x.abs()));

        let s = t + 1.0;
        let [(g, r2), (_, r2_abs), (pw, _), (a, _)] =
            gaussian_moments(&self.grid, [u, &self.abs_u, &self.powered, v], s);
        trace.times.push(t);
        trace.g.push(g);
        trace.f.push(pw.powf(1.0 / p) * s.powf(scale_exponent(self.grid.dim(), p)));
        trace.a.push(a);
        trace.weighted_r2.push(r2 / (4.0 * s * s));
        trace.weighted_r2_abs.push(r2_abs / (4.0 * s * s));
        trace.b.push(None);
        trace.d.push(None);
        trace.duhamel.push(None);
        let index = trace.times.len() - 1;

        let tol = time_tolerance(t);
        for check in &mut self.checks {
            if check.t < t - tol {
                continue;
            }
            let sigma = 2.0 * check.t + 1.0 - t;
            let [(pw, _), (v0, v2)] = gaussian_moments(&self.grid, [&self.powered, v], sigma);
            let ratio = ((check.t + 1.0) / sigma).powf(n / 2.0);
            let d_int = ratio * pw;
            let b_int = ratio * (v2 / (4.0 * sigma * sigma) - n / (2.0 * sigma) * v0);
            check.push(t, d_int, b_int);
            if (check.t - t).abs() <= tol {
                let d = TauIntegral {
                    value: check.d,
                    error_estimate: check.d_error(),
                    coarse_cadence: trace.coarse_cadence,
                };
                let b = TauIntegral {
                    value: check.b,
                    error_estimate: 0.0,
                    coarse_cadence: trace.coarse_cadence,
                };
                trace.d[index] = Some(d);
                trace.b[index] = Some(b);
                if let Some((eps, sum)) = &self.data {
                    let late = 2.0 * t + 1.0;
                    let free = eps * (s / late).powf(n / 2.0) * moment(&self.grid, sum.as_slice(), late, 0);
                    let lhs = g + a + b.value;
                    let rhs = free + d.value;
                    trace.duhamel[index] = Some(DuhamelCheck {
                        t,
                        lhs,
                        rhs,
                        residual: (lhs - rhs).abs() / (1.0 + rhs.abs()),
                    });
                }
            }
        }
        // completed or skipped checks no longer need updates
        let (done, pending): (Vec<Check>, Vec<Check>) = self.checks.drain(..).partition(|c| c.t <= t + tol);
        self.checks = pending;
        for c in done {
            if (c.t - t).abs() > tol && !trace.times.iter().any(|s| (s - c.t).abs() <= time_tolerance(c.t)) {
                trace.missed_checks.push(c.t);
            }
        }
    }

    /// Trace so far; checks beyond the last snapshot are reported missed.
    pub fn finish(mut self) -> FunctionalTrace {
        self.trace.missed_checks.extend(self.checks.iter().map(|c| c.t));
        self.trace
    }
}

impl SnapshotSink for FunctionalAccumulator {
    fn record(&mut self, t: f64, u: &[f64], v: &[f64]) {
        self.ingest(t, u, v);
    }
}

fn trace_up_to(trace: &[SolutionSnapshot], t: f64) -> Result<&[SolutionSnapshot]> {
    let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
        return Err(Error::OutsideTrace { t0: t, start: f64::NAN, end: f64::NAN });
    };
    let tol = time_tolerance(t);
    if t < first.t - tol || t > last.t + tol {
        return Err(Error::OutsideTrace {
            t0: t,
            start: first.t,
            end: last.t,
        });
    }
    let end = trace.iter().position(|s| s.t > t + tol).unwrap_or(trace.len());
    if (trace[end - 1].t - t).abs() > tol {
        return Err(Error::invalid("t", format!("{t} is not a snapshot time")));
    }
    Ok(&trace[..end])
}

fn accumulate(trace: &[SolutionSnapshot], grid: &RadialGrid, p: f64, t: f64) -> Result<FunctionalTrace> {
    let used = trace_up_to(trace, t)?;
    let mut acc = FunctionalAccumulator::new(grid, p, vec![t])?;
    for snap in used {
        acc.record(snap.t, &snap.u, &snap.v);
    }
    Ok(acc.finish())
}

/// `D(t)` from stored snapshots; `t` must be a snapshot time.
pub fn compute_d(trace: &[SolutionSnapshot], grid: &RadialGrid, p: f64, t: f64) -> Result<TauIntegral> {
    let out = accumulate(trace, grid, p, t)?;
    Ok(out.d.last().copied().flatten().expect("check lands on the last snapshot"))
}

/// `B(t)` from stored snapshots; `t` must be a snapshot time.
pub fn compute_b(trace: &[SolutionSnapshot], grid: &RadialGrid, t: f64) -> Result<TauIntegral> {
    // B does not involve |u|^p; any admissible exponent will do
    let out = accumulate(trace, grid, 2.0, t)?;
    Ok(out.b.last().copied().flatten().expect("check lands on the last snapshot"))
}

/// Duhamel identity residual at snapshot time `t`.
pub fn check_duhamel(trace: &[SolutionSnapshot], spec: &ProblemSpec, t: f64) -> Result<DuhamelCheck> {
    let used = trace_up_to(trace, t)?;
    let mut acc = FunctionalAccumulator::for_problem(spec, vec![t])?;
    for snap in used {
        acc.record(snap.t, &snap.u, &snap.v);
    }
    let out = acc.finish();
    Ok(out.duhamel.last().copied().flatten().expect("check lands on the last snapshot"))
}

/// Weights `(a, b)` of `∫_0^h e^{σ−h} φ(σ) dσ ≈ a φ(0) + b φ(h)` for linear
/// `φ`; `a + b = 1 − e^{−h}`.
fn exp_weights(h: f64) -> (f64, f64, f64) {
    let decay = (-h).exp();
    let b = if h < 1e-2 {
        h * (0.5 - h * (1.0 / 6.0 - h * (1.0 / 24.0 - h / 120.0)))
    } else {
        (h - 1.0 + decay) / h
    };
    (decay, (1.0 - decay) - b, b)
}

/// `γ̃(t) = ε + e^{−t} ∫_{t0}^t ∫_0^s (e^s − e^τ) F^p(τ)/(1+τ) dτ ds` on the
/// samples at and after `t0`, with the τ-integrals starting at the first
/// sample.
///
/// Evaluated in the overflow-free form `ε + ∫_{t0}^t e^{s−t} J(s) ds`,
/// `J(s) = ∫_0^s (1 − e^{τ−s}) q(τ) dτ`, where every exponential weight is
/// integrated exactly against the piecewise-linear interpolant of its
/// partner. This keeps the discrete `γ̃` nondecreasing, like the exact one.
pub fn compute_gamma_tilde(times: &[f64], f: &[f64], t0: f64, epsilon: f64, p: f64) -> Result<GammaTilde> {
    if times.len() != f.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            found: f.len(),
        });
    }
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::OutsideTrace { t0, start: f64::NAN, end: f64::NAN });
    };
    let tol = time_tolerance(t0);
    if t0 < first - tol || t0 > last + tol {
        return Err(Error::OutsideTrace {
            t0,
            start: first,
            end: last,
        });
    }
    let start = times.iter().position(|t| *t >= t0 - tol).expect("t0 within range");
    let q: Vec<f64> = times.iter().zip(f).map(|(t, f)| f.powf(p) / (1.0 + t)).collect();

    let mut plain = 0.0;
    let mut damped = 0.0;
    let mut outer = 0.0;
    let mut inner_prev = 0.0;
    let mut values = Vec::with_capacity(times.len() - start);
    if start == 0 {
        values.push(epsilon);
    }
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let (decay, a, b) = exp_weights(h);
        plain += 0.5 * h * (q[k - 1] + q[k]);
        damped = decay * damped + a * q[k - 1] + b * q[k];
        let inner = plain - damped;
        if k > start {
            outer = decay * outer + a * inner_prev + b * inner;
            values.push(epsilon + outer);
        } else if k == start {
            values.push(epsilon);
        }
        inner_prev = inner;
    }
    Ok(GammaTilde {
        t0: times[start],
        start,
        values,
    })
}

/// `(1+t) e^{−t} ∫_0^t e^τ/(1+τ) dτ` by double-exponential quadrature.
/// Vanishes at 0 and tends to 1 as `t → ∞`.
pub fn exp_weight_ratio(t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be finite and nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    // below t − 60 the weight e^{τ−t} is under 1e-26
    let lower = (t - 60.0).max(0.0);
    let out = quadrature::double_exponential::integrate(|tau| (tau - t).exp() / (1.0 + tau), lower, t, 1e-15);
    Ok((1.0 + t) * out.integral)
}
