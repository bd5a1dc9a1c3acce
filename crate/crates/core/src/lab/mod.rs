//! Lifespan experiments: ε-sweeps of the PDE and ODE models, lifespan-law
//! fits and reports.

mod config;
mod fit;
mod kernel;
mod report;

pub use config::{parse_config, parse_eps_list, ConfigMap};
pub use kernel::{kernel_suite, KernelCheck, KernelCheckKind};
pub use fit::{fit_critical, fit_law, fit_subcritical, leave_one_out, FitResult, Law};
pub use report::{emit_report, read_records, render_report, summary_path, ReportMeta};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{FunctionalAccumulator, FunctionalTrace};
use crate::ode_blowup::{integrate, OdeConfig, OdeMode, OdeParams, OdeStatus};
use crate::wave::{
    make_grid, run_with_sink, BlowupStatus, ProblemParams, ProblemSpec, ProfileKind, SchemeConfig, SnapshotSink,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Pde,
    Ode,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Pde => "pde",
            Source::Ode => "ode",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pde" => Ok(Source::Pde),
            "ode" => Ok(Source::Ode),
            other => Err(Error::invalid("source", format!("expected pde or ode, got `{other}`"))),
        }
    }
}

/// Outcome of one run, shared by both models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    BlewUp,
    Survived,
    Inconclusive,
    StepUnderflow,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::BlewUp => "blew_up",
            RunStatus::Survived => "survived",
            RunStatus::Inconclusive => "inconclusive",
            RunStatus::StepUnderflow => "step_underflow",
            RunStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            RunStatus::BlewUp,
            RunStatus::Survived,
            RunStatus::Inconclusive,
            RunStatus::StepUnderflow,
            RunStatus::Failed,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::invalid("status", format!("unknown run status `{s}`")))
    }
}

impl From<BlowupStatus> for RunStatus {
    fn from(s: BlowupStatus) -> Self {
        match s {
            BlowupStatus::BlewUp => RunStatus::BlewUp,
            BlowupStatus::Survived => RunStatus::Survived,
            BlowupStatus::Inconclusive => RunStatus::Inconclusive,
        }
    }
}

impl From<OdeStatus> for RunStatus {
    fn from(s: OdeStatus) -> Self {
        match s {
            OdeStatus::BlewUp => RunStatus::BlewUp,
            OdeStatus::HorizonReached => RunStatus::Survived,
            OdeStatus::StepUnderflow => RunStatus::StepUnderflow,
        }
    }
}

/// One `(ε, T)` measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct LifespanRecord {
    pub epsilon: f64,
    /// Present iff the run blew up.
    pub t: Option<f64>,
    pub status: RunStatus,
    pub source: Source,
    /// Space dimension; for the ODE the `n` with `α = 2/n` when it exists.
    pub dim: Option<usize>,
    /// Nonlinearity exponent (`1 + α` for the ODE).
    pub p: f64,
    pub refine: u32,
    /// Set when `T` decreases against the ε ordering of its sweep.
    pub non_monotone: bool,
    pub steps: usize,
    /// Error message of a failed run.
    pub error: Option<String>,
}

impl LifespanRecord {
    /// Blown-up, monotone records: the ones the fits consume.
    pub fn is_fittable(&self) -> bool {
        self.status == RunStatus::BlewUp && !self.non_monotone && self.t.is_some_and(|t| t > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSettings {
    pub dim: usize,
    pub p: f64,
    pub profile: ProfileKind,
    /// Velocity data is `g_scale` times the profile.
    pub g_scale: f64,
    pub dr: f64,
    /// Largest step; `None` uses `cfl·dr`.
    pub dt: Option<f64>,
    pub theta: f64,
    pub t_max: f64,
    /// Snapshot spacing for functionals and dumps.
    pub cadence: f64,
    pub node_budget: usize,
}

impl Default for PdeSettings {
    fn default() -> Self {
        let scheme = SchemeConfig::default();
        Self {
            dim: 1,
            p: 3.0,
            profile: ProfileKind::Bump,
            g_scale: 1.0,
            dr: 0.05,
            dt: None,
            theta: scheme.theta,
            t_max: 200.0,
            cadence: 0.05,
            node_budget: scheme.node_budget,
        }
    }
}

impl PdeSettings {
    /// Level `k` halves `dr`, `dt`, `θ` and the snapshot cadence `k` times.
    pub fn refined(&self, level: u32) -> Self {
        let f = 0.5f64.powi(level as i32);
        Self {
            dr: self.dr * f,
            dt: self.dt.map(|dt| dt * f),
            theta: self.theta * f,
            cadence: self.cadence * f,
            ..self.clone()
        }
    }

    pub fn params(&self, epsilon: f64) -> ProblemParams {
        ProblemParams {
            dim: self.dim,
            p: self.p,
            epsilon,
            t_max: self.t_max,
            nonlinearity_on: true,
        }
    }

    pub fn problem(&self, epsilon: f64) -> Result<ProblemSpec> {
        let params = self.params(epsilon);
        let grid = make_grid(&params, self.dr, self.node_budget)?;
        ProblemSpec::with_profile_scaled(params, self.profile, &grid, self.g_scale)
    }

    pub fn scheme(&self, snapshots: bool) -> SchemeConfig {
        let base = SchemeConfig::default();
        SchemeConfig {
            dt0: self.dt.unwrap_or(base.cfl * self.dr),
            theta: self.theta,
            snapshot_cadence: snapshots.then_some(self.cadence),
            node_budget: self.node_budget,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSettings {
    pub alpha: f64,
    pub beta: f64,
    pub c0: f64,
    pub i0_prime: f64,
    pub mode: OdeMode,
    pub config: OdeConfig,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1.0,
            c0: 1.0,
            i0_prime: 0.0,
            mode: OdeMode::SecondOrder,
            config: OdeConfig::default(),
        }
    }
}

impl OdeSettings {
    pub fn params(&self, epsilon: f64) -> OdeParams {
        OdeParams {
            alpha: self.alpha,
            beta: self.beta,
            c0: self.c0,
            i0: epsilon,
            i0_prime: self.i0_prime,
        }
    }

    /// `n` with `α = 2/n`, when `α` is of that form.
    pub fn dim(&self) -> Option<usize> {
        let n = (2.0 / self.alpha).round();
        (n >= 1.0 && (2.0 / n - self.alpha).abs() <= 1e-12).then_some(n as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pde(PdeSettings),
    Ode(OdeSettings),
}

impl Model {
    pub fn source(&self) -> Source {
        match self {
            Model::Pde(_) => Source::Pde,
            Model::Ode(_) => Source::Ode,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: Model,
    pub epsilons: Vec<f64>,
    pub refine: u32,
    /// Concurrent runs; 0 uses all cores.
    pub workers: usize,
    /// Recorded with the results. Every run is deterministic, so the seed
    /// changes nothing numerically.
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("eps", format!("values must be positive, got {e}")));
        }
        match &self.model {
            Model::Pde(s) => {
                s.params(1.0).validate()?;
                if !(s.dr > 0.0 && s.dr.is_finite()) {
                    return Err(Error::invalid("dr", format!("must be positive, got {}", s.dr)));
                }
                if !(s.cadence > 0.0) {
                    return Err(Error::invalid("cadence", "must be positive"));
                }
                let refined = s.refined(self.refine);
                refined.scheme(false).validate(refined.dr)?;
                make_grid(&refined.params(1.0), refined.dr, refined.node_budget).map(|_| ())
            }
            Model::Ode(s) => s.params(1.0).validate(),
        }
    }
}

/// Runs every ε of the sweep on at most `spec.workers` threads. Records come
/// back sorted by ε descending; failed runs are kept with their error.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<LifespanRecord>> {
    spec.validate()?;
    let mut eps = spec.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let mut records: Vec<LifespanRecord> = pool.install(|| {
        eps.par_iter()
            .map(|&e| match &spec.model {
                Model::Pde(s) => pde_record(&s.refined(spec.refine), e, spec.refine),
                Model::Ode(s) => ode_record(s, e, spec.refine),
            })
            .collect()
    });
    flag_non_monotone(&mut records);
    Ok(records)
}

/// PDE sweep that hands each run a sink built by `make_sink(ε)`. Records
/// are ordered and flagged as in [`run_experiment`]; the sink output is
/// `None` for failed runs.
pub fn run_pde_sweep<S, F>(spec: &ExperimentSpec, make_sink: F) -> Result<Vec<(LifespanRecord, Option<S::Output>)>>
where
    S: PdeSink,
    S::Output: Send,
    F: Fn(f64) -> Result<S> + Sync,
{
    spec.validate()?;
    let Model::Pde(settings) = &spec.model else {
        return Err(Error::invalid("source", "snapshot sinks need a pde experiment"));
    };
    let settings = settings.refined(spec.refine);
    let mut eps = spec.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let results: Vec<(LifespanRecord, Option<S::Output>)> = pool.install(|| {
        eps.par_iter()
            .map(|&e| match make_sink(e).and_then(|sink| run_pde(&settings, e, spec.refine, sink)) {
                Ok((record, out)) => (record, Some(out)),
                Err(err) => (failed(Source::Pde, e, Some(settings.dim), settings.p, spec.refine, err), None),
            })
            .collect()
    });
    let (mut records, outputs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    flag_non_monotone(&mut records);
    Ok(records.into_iter().zip(outputs).collect())
}

fn pde_record(settings: &PdeSettings, epsilon: f64, refine: u32) -> LifespanRecord {
    match run_pde(settings, epsilon, refine, ()) {
        Ok((record, ())) => record,
        Err(e) => failed(Source::Pde, epsilon, Some(settings.dim), settings.p, refine, e),
    }
}

fn ode_record(settings: &OdeSettings, epsilon: f64, refine: u32) -> LifespanRecord {
    let params = settings.params(epsilon);
    match integrate(&params, settings.mode, &settings.config) {
        Ok(res) => LifespanRecord {
            epsilon,
            t: res.t_blowup,
            status: res.status.into(),
            source: Source::Ode,
            dim: settings.dim(),
            p: 1.0 + settings.alpha,
            refine,
            non_monotone: false,
            steps: res.steps,
            error: None,
        },
        Err(e) => failed(Source::Ode, epsilon, settings.dim(), 1.0 + settings.alpha, refine, e),
    }
}

fn failed(source: Source, epsilon: f64, dim: Option<usize>, p: f64, refine: u32, e: Error) -> LifespanRecord {
    LifespanRecord {
        epsilon,
        t: None,
        status: RunStatus::Failed,
        source,
        dim,
        p,
        refine,
        non_monotone: false,
        steps: 0,
        error: Some(e.to_string()),
    }
}

/// Marks blown-up records whose `T` drops below that of a larger ε.
fn flag_non_monotone(records: &mut [LifespanRecord]) {
    let mut best: Option<f64> = None;
    for r in records.iter_mut() {
        if let (RunStatus::BlewUp, Some(t)) = (r.status, r.t) {
            if best.is_some_and(|b| t < b) {
                r.non_monotone = true;
            } else {
                best = Some(t);
            }
        }
    }
}

/// One PDE run at already-refined settings, with snapshots fed to `sink`.
/// A `()` sink disables snapshots.
pub fn run_pde<S: PdeSink>(
    settings: &PdeSettings,
    epsilon: f64,
    refine: u32,
    mut sink: S,
) -> Result<(LifespanRecord, S::Output)> {
    let spec = settings.problem(epsilon)?;
    sink.prepare(&spec)?;
    let config = settings.scheme(S::WANTS_SNAPSHOTS);
    let outcome = run_with_sink(&spec, &config, &mut sink)?;
    let record = LifespanRecord {
        epsilon,
        t: outcome.report.t_est,
        status: outcome.report.status.into(),
        source: Source::Pde,
        dim: Some(settings.dim),
        p: settings.p,
        refine,
        non_monotone: false,
        steps: outcome.steps,
        error: None,
    };
    Ok((record, sink.finish()?))
}

/// Snapshot consumer for [`run_pde`] that needs the problem before the run.
pub trait PdeSink: SnapshotSink {
    const WANTS_SNAPSHOTS: bool = true;
    type Output;

    fn prepare(&mut self, spec: &ProblemSpec) -> Result<()>;
    fn finish(self) -> Result<Self::Output>;
}

impl SnapshotSink for () {
    fn record(&mut self, _: f64, _: &[f64], _: &[f64]) {}
}

impl PdeSink for () {
    const WANTS_SNAPSHOTS: bool = false;
    type Output = ();

    fn prepare(&mut self, _: &ProblemSpec) -> Result<()> {
        Ok(())
    }

    fn finish(self) -> Result<()> {
        Ok(())
    }
}

/// Functional time series with checks at the given times.
#[derive(Debug, Default)]
pub struct TraceSink {
    checks: Vec<f64>,
    acc: Option<FunctionalAccumulator>,
}

impl TraceSink {
    pub fn new(checks: Vec<f64>) -> Self {
        Self { checks, acc: None }
    }
}

impl SnapshotSink for TraceSink {
    fn record(&mut self, t: f64, u: &[f64], v: &[f64]) {
        if let Some(acc) = &mut self.acc {
            acc.record(t, u, v);
        }
    }
}

impl PdeSink for TraceSink {
    type Output = FunctionalTrace;

    fn prepare(&mut self, spec: &ProblemSpec) -> Result<()> {
        self.acc = Some(FunctionalAccumulator::for_problem(spec, std::mem::take(&mut self.checks))?);
        Ok(())
    }

    fn finish(self) -> Result<FunctionalTrace> {
        self.acc
            .map(FunctionalAccumulator::finish)
            .ok_or_else(|| Error::invalid("sink", "run never started"))
    }
}

impl<W: std::io::Write> PdeSink for crate::wave::CsvSnapshotWriter<W> {
    type Output = W;

    fn prepare(&mut self, _: &ProblemSpec) -> Result<()> {
        Ok(())
    }

    fn finish(self) -> Result<W> {
        crate::wave::CsvSnapshotWriter::finish(self).map_err(|e| Error::io("snapshot dump", e))
    }
}

impl<A: PdeSink, B: PdeSink> PdeSink for (A, B) {
    type Output = (A::Output, B::Output);

    fn prepare(&mut self, spec: &ProblemSpec) -> Result<()> {
        self.0.prepare(spec)?;
        self.1.prepare(spec)
    }

    fn finish(self) -> Result<Self::Output> {
        Ok((self.0.finish()?, self.1.finish()?))
    }
}

/// Check times `2^j, j ≥ −1`, up to `t_max`, rounded to multiples of
/// `cadence` so that snapshots land on them.
pub fn geometric_checks(t_max: f64, cadence: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.5;
    while t <= t_max {
        let snapped = (t / cadence).round() * cadence;
        if snapped > 0.0 && out.last() != Some(&snapped) {
            out.push(snapped);
        }
        t *= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ode_spec(eps: Vec<f64>) -> ExperimentSpec {
        ExperimentSpec {
            model: Model::Ode(OdeSettings::default()),
            epsilons: eps,
            refine: 0,
            workers: 2,
            seed: 7,
        }
    }

    #[test]
    fn ode_sweep_cardinality_and_order() {
        let records = run_experiment(&ode_spec(vec![0.6, 1.0, 0.4, 0.8])).unwrap();
        assert_eq!(records.len(), 4);
        let eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
        assert_eq!(eps, vec![1.0, 0.8, 0.6, 0.4]);
        assert!(records.iter().all(|r| r.status == RunStatus::BlewUp && !r.non_monotone));
        assert!(records.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(records[0].dim, Some(4));
        assert_eq!(records[0].p, 1.5);
    }

    #[test]
    fn empty_grid_gives_no_records() {
        assert!(run_experiment(&ode_spec(vec![])).unwrap().is_empty());
    }

    #[test]
    fn bad_epsilon_is_rejected() {
        assert!(run_experiment(&ode_spec(vec![0.5, -1.0])).is_err());
    }

    #[test]
    fn node_budget_is_a_config_error() {
        let settings = PdeSettings {
            node_budget: 10,
            ..PdeSettings::default()
        };
        let spec = ExperimentSpec {
            model: Model::Pde(settings),
            epsilons: vec![0.5],
            refine: 0,
            workers: 1,
            seed: 0,
        };
        assert!(matches!(run_experiment(&spec), Err(Error::NodeBudget { .. })));
    }

    #[test]
    fn pde_sweep_is_monotone() {
        let settings = PdeSettings {
            dim: 1,
            p: 3.0,
            profile: ProfileKind::Plateau,
            dr: 0.05,
            t_max: 60.0,
            ..PdeSettings::default()
        };
        let spec = ExperimentSpec {
            model: Model::Pde(settings),
            epsilons: vec![0.5, 0.7, 0.6],
            refine: 0,
            workers: 3,
            seed: 0,
        };
        let records = run_experiment(&spec).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|r| r.status == RunStatus::BlewUp && !r.non_monotone));
        assert!(records.windows(2).all(|w| w[1].t.unwrap() > w[0].t.unwrap()));
    }

    #[test]
    fn monotonicity_flags() {
        let mk = |epsilon: f64, t: f64| LifespanRecord {
            epsilon,
            t: Some(t),
            status: RunStatus::BlewUp,
            source: Source::Pde,
            dim: Some(1),
            p: 3.0,
            refine: 0,
            non_monotone: false,
            steps: 1,
            error: None,
        };
        let mut records = vec![mk(0.6, 5.0), mk(0.5, 8.0), mk(0.4, 7.0), mk(0.3, 9.0)];
        flag_non_monotone(&mut records);
        let flags: Vec<bool> = records.iter().map(|r| r.non_monotone).collect();
        assert_eq!(flags, vec![false, false, true, false]);
    }

    #[test]
    fn refinement_halves_resolution() {
        let s = PdeSettings::default().refined(2);
        assert_eq!(s.dr, 0.0125);
        assert_eq!(s.theta, 0.025);
        assert_eq!(s.cadence, 0.0125);
        assert_eq!(s.scheme(false).dt0, 0.00625);
    }

    #[test]
    fn check_plan() {
        assert_eq!(geometric_checks(10.0, 0.05), vec![0.5, 1.0, 2.0, 4.0, 8.0]);
        assert!(geometric_checks(0.4, 0.05).is_empty());
    }
}
