//! Three-level scheme with semi-implicit damping.
//!
//! For a constant step `h` the update is
//! `(u⁺ − 2u + u⁻)/h² + (u⁺ − u⁻)/(2h) = Δ_h u + |u|^p`,
//! solved pointwise for `u⁺`. The state keeps the collocated velocity `v`;
//! the previous half-step velocity `(u − u⁻)/h` is recovered from it exactly,
//! which lets the step vary from one update to the next.

use std::io::Write;

use super::blowup::{detect_blowup, BlowupReport, BlowupStatus};
use super::{ProblemSpec, SchemeConfig};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;

/// Fast paths for the common exponents.
#[derive(Debug, Clone, Copy)]
enum Power {
    ThreeHalves,
    Square,
    Cube,
    General(f64),
}

impl Power {
    fn new(p: f64) -> Self {
        match p {
            1.5 => Power::ThreeHalves,
            2.0 => Power::Square,
            3.0 => Power::Cube,
            _ => Power::General(p),
        }
    }

    #[inline]
    fn abs_pow(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Power::ThreeHalves => a * a.sqrt(),
            Power::Square => a * a,
            Power::Cube => a * a * a,
            Power::General(p) => a.powf(p),
        }
    }
}

/// Radial fields at one time level. `u` and `v` have the grid's length.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub u: Vec<f64>,
    /// Second-order approximation of `u_t` at `t`.
    pub v: Vec<f64>,
    /// Step that produced this state (0 before the first step).
    pub dt: f64,
    /// `(t_k, max|u(t_k)|)` after every step, starting at `t = 0`.
    pub sup_history: Vec<(f64, f64)>,
    /// `Δ_h u + |u|^p` at this level, valid on `0..=front`.
    force: Vec<f64>,
    /// `u` and `v` are exactly zero from this index on.
    front: usize,
}

impl SolverState {
    /// State at `t = 0` with `u = εf`, `u_t = εg`.
    pub fn initial(spec: &ProblemSpec) -> Self {
        let grid = spec.grid();
        let eps = spec.params.epsilon;
        let u: Vec<f64> = spec.f.values().iter().map(|f| eps * f).collect();
        let v: Vec<f64> = spec.g.values().iter().map(|g| eps * g).collect();
        let last_nonzero = u
            .iter()
            .zip(&v)
            .rposition(|(a, b)| *a != 0.0 || *b != 0.0);
        let front = last_nonzero.map_or(0, |i| i + 1);
        let mut state = Self {
            t: 0.0,
            sup_history: vec![(0.0, max_abs(&u))],
            u,
            v,
            dt: 0.0,
            force: vec![0.0; grid.len()],
            front,
        };
        state.refresh_force(spec, grid);
        state
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.u[..self.front])
    }

    /// Index past the discrete support: `u` and `v` vanish from here on.
    pub fn support_end(&self) -> usize {
        self.front
    }

    fn refresh_force(&mut self, spec: &ProblemSpec, grid: &RadialGrid) {
        let end = (self.front + 1).min(grid.len());
        grid.laplacian(&self.u, &mut self.force, end);
        if spec.params.nonlinearity_on {
            let pow = Power::new(spec.params.p);
            for (f, u) in self.force[..end].iter_mut().zip(&self.u) {
                *f += pow.abs_pow(*u);
            }
        }
    }

    /// Advances by `h` in place.
    pub fn advance(&mut self, spec: &ProblemSpec, grid: &RadialGrid, h: f64) -> Result<()> {
        let h_prev = if self.dt > 0.0 { self.dt } else { h };
        let h_avg = 0.5 * (h + h_prev);
        let keep = 1.0 / h_avg - 0.5;
        let denom = 1.0 / h_avg + 0.5;
        let back = 0.5 * h_prev;
        let n = grid.len();
        // the stencil widens the support by one node per step; the last node
        // holds the homogeneous boundary value
        let active = (self.front + 1).min(n - 1);
        for i in 0..active {
            let half_prev = self.v[i] * (1.0 + back) - back * self.force[i];
            let half_next = (half_prev * keep + self.force[i]) / denom;
            self.u[i] += h * half_next;
            // stash the half-step velocity until the new force is known
            self.v[i] = half_next;
        }
        self.front = active;
        self.refresh_force(spec, grid);
        let half = 0.5 * h;
        for i in 0..active {
            self.v[i] = (self.v[i] + half * self.force[i]) / (1.0 + half);
        }
        self.t += h;
        self.dt = h;
        let sup = self.max_abs();
        if !sup.is_finite() {
            let node = self.u.iter().position(|x| !x.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite { t: self.t, node });
        }
        self.sup_history.push((self.t, sup));
        Ok(())
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m: f64, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

/// One step of size `state.dt` (or `dt0` from the first state), returned as
/// a new value.
pub fn step(state: &SolverState, spec: &ProblemSpec, grid: &RadialGrid, h: f64) -> Result<SolverState> {
    let mut next = state.clone();
    next.advance(spec, grid, h)?;
    Ok(next)
}

/// `½ Σ_i V_i v_i² + ½ Σ_{i+½} A_{i+½} dr ((u_{i+1} − u_i)/dr)²` with cell
/// volumes `V_i` and face areas `A_{i+½}`, the pairing under which the
/// discrete Laplacian is symmetric.
pub fn discrete_energy(grid: &RadialGrid, u: &[f64], v: &[f64]) -> f64 {
    let dr = grid.dr();
    let area = crate::grid::sphere_area(grid.dim());
    let kinetic: f64 = v.iter().enumerate().map(|(i, v)| grid.cell_volume(i) * v * v).sum();
    let gradient: f64 = u
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let mid = (i as f64 + 0.5) * dr;
            let slope = (pair[1] - pair[0]) / dr;
            area * mid.powi(grid.dim() as i32 - 1) * dr * slope * slope
        })
        .sum();
    0.5 * (kinetic + gradient)
}

/// Solution sample handed to a [`SnapshotSink`]. `u` and `v` are truncated
/// after the discrete support; missing trailing entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSnapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub trait SnapshotSink {
    fn record(&mut self, t: f64, u: &[f64], v: &[f64]);
}

impl SnapshotSink for Vec<SolutionSnapshot> {
    fn record(&mut self, t: f64, u: &[f64], v: &[f64]) {
        self.push(SolutionSnapshot {
            t,
            u: u.to_vec(),
            v: v.to_vec(),
        });
    }
}

impl<S: SnapshotSink + ?Sized> SnapshotSink for &mut S {
    fn record(&mut self, t: f64, u: &[f64], v: &[f64]) {
        (**self).record(t, u, v)
    }
}

/// Feeds every snapshot to both sinks.
impl<A: SnapshotSink, B: SnapshotSink> SnapshotSink for (A, B) {
    fn record(&mut self, t: f64, u: &[f64], v: &[f64]) {
        self.0.record(t, u, v);
        self.1.record(t, u, v);
    }
}

/// Writes snapshots as `t,r,u,v` rows, one per node of the discrete support.
///
/// Write errors are latched; [`CsvSnapshotWriter::finish`] reports the first.
#[derive(Debug)]
pub struct CsvSnapshotWriter<W: Write> {
    out: W,
    dr: f64,
    error: Option<std::io::Error>,
}

impl<W: Write> CsvSnapshotWriter<W> {
    pub fn new(mut out: W, dr: f64) -> std::io::Result<Self> {
        writeln!(out, "t,r,u,v")?;
        Ok(Self { out, dr, error: None })
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> SnapshotSink for CsvSnapshotWriter<W> {
    fn record(&mut self, t: f64, u: &[f64], v: &[f64]) {
        if self.error.is_some() {
            return;
        }
        // an empty support still marks the time
        let rows = u.len().max(1);
        for i in 0..rows {
            let (ui, vi) = (u.get(i).copied().unwrap_or(0.0), v.get(i).copied().unwrap_or(0.0));
            if let Err(e) = writeln!(self.out, "{t},{},{ui},{vi}", i as f64 * self.dr) {
                self.error = Some(e);
                return;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: BlowupReport,
    pub state: SolverState,
    pub steps: usize,
}

/// Integrates to blow-up, `t_max`, or step underflow, collecting snapshots.
pub fn run(spec: &ProblemSpec, config: &SchemeConfig) -> Result<(Vec<SolutionSnapshot>, BlowupReport)> {
    let mut trace = Vec::new();
    let outcome = run_with_sink(spec, config, &mut trace)?;
    Ok((trace, outcome.report))
}

pub fn run_with_sink(spec: &ProblemSpec, config: &SchemeConfig, mut sink: impl SnapshotSink) -> Result<RunOutcome> {
    let grid = spec.grid().clone();
    config.validate(grid.dr())?;
    let params = spec.params;
    let t_max = params.t_max;
    let rate_exponent = (params.p - 1.0) / config.blowup.rate.order();
    let mut state = SolverState::initial(spec);
    let mut steps = 0usize;

    let cadence = config.snapshot_cadence;
    let mut next_snapshot_index = 0u64;
    let mut record = |state: &SolverState, index: &mut u64| {
        let end = state.front;
        sink.record(state.t, &state.u[..end], &state.v[..end]);
        *index += 1;
    };
    if cadence.is_some() {
        record(&state, &mut next_snapshot_index);
    }

    let status = loop {
        if state.t >= t_max {
            break BlowupStatus::Survived;
        }
        let sup = state.max_abs();
        if params.nonlinearity_on && sup > config.blowup.guard {
            break BlowupStatus::BlewUp;
        }
        let mut h = config.dt0;
        if params.nonlinearity_on {
            h = h.min(config.theta / sup.max(1.0).powf(rate_exponent));
        }
        if h < config.dt_floor {
            break BlowupStatus::Inconclusive;
        }
        let snapshot_target = cadence.map(|c| next_snapshot_index as f64 * c);
        let mut landing = None;
        if let Some(target) = snapshot_target {
            if state.t + h >= target - 1e-9 * h {
                h = target - state.t;
                landing = Some(target);
            }
        }
        if state.t + h >= t_max - 1e-9 * h {
            h = t_max - state.t;
            landing = Some(t_max);
        }
        if h > 0.0 {
            state.advance(spec, &grid, h)?;
            steps += 1;
            if let Some(time) = landing {
                state.t = time;
                if let Some(last) = state.sup_history.last_mut() {
                    last.0 = time;
                }
            }
        }
        if snapshot_target == Some(state.t) {
            record(&state, &mut next_snapshot_index);
        }
    };

    let report = match status {
        BlowupStatus::BlewUp => detect_blowup(&state.sup_history, params.p, &config.blowup),
        other => BlowupReport::without_fit(other, state.t),
    };
    Ok(RunOutcome { report, state, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::{make_grid, ProblemParams, ProfileKind};
    use proptest::prelude::*;

    fn spec(dim: usize, p: f64, epsilon: f64, t_max: f64, dr: f64, profile: ProfileKind) -> ProblemSpec {
        let params = ProblemParams {
            dim,
            p,
            epsilon,
            t_max,
            nonlinearity_on: true,
        };
        let grid = make_grid(&params, dr, 1_000_000).unwrap();
        ProblemSpec::with_profile(params, profile, &grid).unwrap()
    }

    fn config(dr: f64) -> SchemeConfig {
        SchemeConfig {
            dt0: 0.5 * dr,
            ..SchemeConfig::default()
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = spec(3, 2.0, 0.0, 5.0, 0.05, ProfileKind::Bump);
        let (trace, report) = run(&s, &config(0.05)).unwrap();
        assert_eq!(report.status, BlowupStatus::Survived);
        assert!(trace.iter().all(|snap| snap.u.iter().chain(&snap.v).all(|x| *x == 0.0)));
    }

    #[test]
    fn first_step_is_the_taylor_step() {
        // from (u, v) the first update is u + h v + h²/2 (Δ_h u + |u|^p − v)
        let s = spec(2, 3.0, 0.5, 1.0, 0.05, ProfileKind::Bump);
        let grid = s.grid().clone();
        let state = SolverState::initial(&s);
        let mut force = vec![0.0; grid.len()];
        grid.laplacian(&state.u, &mut force, grid.len());
        let h = 4e-3;
        let next = step(&state, &s, &grid, h).unwrap();
        for i in 0..grid.len() - 1 {
            let accel = force[i] + state.u[i].abs().powi(3) - state.v[i];
            let taylor = state.u[i] + h * state.v[i] + 0.5 * h * h * accel;
            assert!((next.u[i] - taylor).abs() <= 1e-14, "node {i}");
        }
    }

    #[test]
    fn variable_steps_are_consistent() {
        // two steps of h against one of 2h: local errors shrink at least like h³
        let s = spec(2, 3.0, 0.5, 1.0, 0.05, ProfileKind::Bump);
        let grid = s.grid().clone();
        let state = SolverState::initial(&s);
        let gap = |h: f64| {
            let two = step(&step(&state, &s, &grid, h).unwrap(), &s, &grid, h).unwrap();
            let one = step(&state, &s, &grid, 2.0 * h).unwrap();
            two.u.iter().zip(&one.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (coarse, fine) = (gap(4e-3), gap(2e-3));
        assert!(coarse < 1e-6, "gap {coarse}");
        assert!(coarse / fine > 7.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn discrete_domain_of_dependence() {
        // the three-point stencil moves the support by one node per step
        let s = spec(2, 2.0, 0.3, 6.0, 0.05, ProfileKind::Cone);
        let mut state = SolverState::initial(&s);
        let grid = s.grid().clone();
        let start = state.support_end();
        for k in 1..=200 {
            state.advance(&s, &grid, 0.025).unwrap();
            assert!(state.support_end() <= start + k);
            assert!(state.u[state.support_end()..].iter().all(|u| *u == 0.0));
        }
    }

    #[test]
    fn precursor_beyond_light_cone_vanishes_under_refinement() {
        // outside r ≤ 1 + t + 2dr the exact solution is zero; the discrete one
        // carries a small dispersive precursor that refinement removes
        let leakage = |dr: f64| {
            let s = spec(1, 1.2, 0.3, 6.0, dr, ProfileKind::Bump);
            let (trace, _) = run(&s, &config(dr)).unwrap();
            let mut worst = 0.0f64;
            for snap in &trace {
                let sup = snap.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for (i, u) in snap.u.iter().enumerate() {
                    if i as f64 * dr > 1.0 + snap.t + 2.0 * dr {
                        worst = worst.max(u.abs() / sup);
                    }
                }
            }
            worst
        };
        let (coarse, fine) = (leakage(0.05), leakage(0.025));
        assert!(coarse < 2e-4, "{coarse}");
        assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn linear_energy_decays() {
        for dim in [1, 3, 4] {
            let params = ProblemParams {
                dim,
                p: 2.0,
                epsilon: 1.0,
                t_max: 8.0,
                nonlinearity_on: false,
            };
            let dr = 0.05;
            let grid = make_grid(&params, dr, 1_000_000).unwrap();
            let s = ProblemSpec::with_profile(params, ProfileKind::Bump, &grid).unwrap();
            let (trace, report) = run(&s, &config(dr)).unwrap();
            assert_eq!(report.status, BlowupStatus::Survived);
            let energy: Vec<f64> = trace.iter().map(|snap| discrete_energy(&grid, &snap.u, &snap.v)).collect();
            let tol = 0.5 * dr * energy[0];
            for w in energy.windows(2) {
                assert!(w[1] <= w[0] + tol, "dim {dim}: {} -> {}", w[0], w[1]);
            }
            assert!(energy.last().unwrap() < &energy[0]);
            let sup0 = trace[0].u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(trace.iter().all(|snap| snap.u.iter().all(|x| x.abs() <= 2.0 * sup0)));
        }
    }

    #[test]
    fn zero_amplitude_survives() {
        let s = spec(1, 3.0, 0.0, 50.0, 0.05, ProfileKind::Plateau);
        let outcome = run_with_sink(&s, &config(0.05), ()).unwrap();
        assert_eq!(outcome.report.status, BlowupStatus::Survived);
        assert_eq!(outcome.report.last_time, 50.0);
        assert_eq!(outcome.state.max_abs(), 0.0);
    }

    #[test]
    fn lifespan_is_grid_robust() {
        let lifespan = |dr: f64| {
            let s = spec(1, 3.0, 0.5, 400.0, dr, ProfileKind::Bump);
            let cfg = SchemeConfig {
                snapshot_cadence: None,
                ..config(dr)
            };
            let outcome = run_with_sink(&s, &cfg, ()).unwrap();
            assert_eq!(outcome.report.status, BlowupStatus::BlewUp);
            outcome.report.t_est.unwrap()
        };
        let (coarse, fine) = (lifespan(0.05), lifespan(0.025));
        assert!((coarse / fine - 1.0).abs() < 0.05, "{coarse} vs {fine}");
    }

    #[test]
    fn snapshot_dump_rows() {
        let s = spec(1, 3.0, 0.5, 0.1, 0.1, ProfileKind::Cone);
        let cfg = SchemeConfig {
            dt0: 0.05,
            snapshot_cadence: Some(0.05),
            ..SchemeConfig::default()
        };
        let writer = CsvSnapshotWriter::new(Vec::new(), 0.1).unwrap();
        let mut both = (writer, Vec::<SolutionSnapshot>::new());
        run_with_sink(&s, &cfg, &mut both).unwrap();
        let (writer, trace) = both;
        let text = String::from_utf8(writer.finish().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,r,u,v"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), trace.iter().map(|snap| snap.u.len()).sum::<usize>());
        assert_eq!(trace.len(), 3);
        assert_eq!(rows[0], "0,0,0.5,0.5");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn support_grows_and_stays_finite(dim in 1usize..=4, eps in 0.0f64..0.4, kind in 0usize..3, p in 1.2f64..3.0) {
            let s = spec(dim, p, eps, 3.0, 0.1, ProfileKind::ALL[kind]);
            let (trace, _) = run(&s, &config(0.1)).unwrap();
            // snapshots hold the discrete support only; it grows by at most
            // one node per step of at least θ-limited size
            for w in trace.windows(2) {
                prop_assert!(w[1].t > w[0].t);
                prop_assert!(w[1].u.len() >= w[0].u.len());
            }
            for snap in &trace {
                prop_assert!(snap.u.iter().chain(&snap.v).all(|x| x.is_finite()));
            }
        }

        #[test]
        fn linear_runs_scale_with_amplitude(dim in 1usize..=4, eps in 0.01f64..2.0) {
            let params = |epsilon| ProblemParams { dim, p: 2.0, epsilon, t_max: 2.0, nonlinearity_on: false };
            let grid = make_grid(&params(1.0), 0.1, 1_000_000).unwrap();
            let unit = ProblemSpec::with_profile(params(1.0), ProfileKind::Bump, &grid).unwrap();
            let scaled = ProblemSpec::with_profile(params(eps), ProfileKind::Bump, &grid).unwrap();
            let a = run_with_sink(&unit, &config(0.1), ()).unwrap().state;
            let b = run_with_sink(&scaled, &config(0.1), ()).unwrap().state;
            for (x, y) in a.u.iter().zip(&b.u) {
                prop_assert!((eps * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
