//! Radially symmetric finite-difference solver for
//! `u_tt − Δu + u_t = |u|^p` with data `(εf, εg)` supported in the unit ball.

mod blowup;
mod profiles;
mod scheme;

pub use blowup::{detect_blowup, BlowupPolicy, BlowupRate, BlowupReport, BlowupStatus};
pub use profiles::{sample_initial_profiles, ProfileKind};
pub use scheme::{
    discrete_energy, run, run_with_sink, CsvSnapshotWriter, step, RunOutcome, SnapshotSink, SolutionSnapshot,
    SolverState,
};

use crate::error::{Error, Result};
use crate::grid::{check_dim, RadialGrid, RadialProfile};

/// Scalar parameters of the Cauchy problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub dim: usize,
    pub p: f64,
    pub epsilon: f64,
    pub t_max: f64,
    pub nonlinearity_on: bool,
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::invalid("p", format!("must exceed 1, got {}", self.p)));
        }
        // ε = 0 is accepted: it is the zero-solution control case.
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("must be nonnegative, got {}", self.epsilon)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid("t_max", format!("must be finite and nonnegative, got {}", self.t_max)));
        }
        Ok(())
    }

    /// Fujita exponent `1 + 2/n`.
    pub fn critical_p(&self) -> f64 {
        1.0 + 2.0 / self.dim as f64
    }
}

/// Parameters plus the unscaled initial profiles `f` and `g`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub params: ProblemParams,
    pub f: RadialProfile,
    pub g: RadialProfile,
}

impl ProblemSpec {
    /// Checks that `f, g` are nonnegative, vanish for `r > 1` and live on a
    /// grid of the problem's dimension.
    pub fn new(params: ProblemParams, f: RadialProfile, g: RadialProfile) -> Result<Self> {
        params.validate()?;
        for (name, prof) in [("f", &f), ("g", &g)] {
            if prof.grid().dim() != params.dim {
                return Err(Error::invalid(name, "profile grid dimension differs from the problem"));
            }
            for (r, v) in prof.grid().nodes().zip(prof.values()) {
                if *v < 0.0 {
                    return Err(Error::invalid(name, format!("negative value {v} at r = {r}")));
                }
                if r > 1.0 + 1e-12 && *v != 0.0 {
                    return Err(Error::invalid(name, format!("nonzero value {v} at r = {r} > 1")));
                }
            }
        }
        if f.grid() != g.grid() {
            return Err(Error::invalid("g", "f and g must share a grid"));
        }
        Ok(Self { params, f, g })
    }

    /// Named profile pair sampled on `grid`.
    pub fn with_profile(params: ProblemParams, profile: ProfileKind, grid: &RadialGrid) -> Result<Self> {
        Self::with_profile_scaled(params, profile, grid, 1.0)
    }

    /// As [`Self::with_profile`] with the velocity replaced by `g_scale·g`;
    /// `g_scale = 0` starts from rest.
    pub fn with_profile_scaled(
        params: ProblemParams,
        profile: ProfileKind,
        grid: &RadialGrid,
        g_scale: f64,
    ) -> Result<Self> {
        if !(g_scale >= 0.0 && g_scale.is_finite()) {
            return Err(Error::invalid("g_scale", format!("must be nonnegative, got {g_scale}")));
        }
        let (f, g) = sample_initial_profiles(profile.name(), grid)?;
        Self::new(params, f, g.scaled(g_scale))
    }

    pub fn grid(&self) -> &RadialGrid {
        self.f.grid()
    }
}

/// Time-stepping and stopping constants of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// Largest time step.
    pub dt0: f64,
    /// Required `dt0 ≤ cfl·dr`.
    pub cfl: f64,
    /// Adaptive factor in `dt = min(dt0, θ / max(1, max|u|)^{(p-1)/k})`.
    pub theta: f64,
    /// Runs whose step falls below this are `Inconclusive`.
    pub dt_floor: f64,
    pub blowup: BlowupPolicy,
    /// Snapshot spacing in time; `None` disables snapshots.
    pub snapshot_cadence: Option<f64>,
    pub node_budget: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt0: 0.025,
            cfl: 0.5,
            theta: 0.1,
            dt_floor: 1e-12,
            blowup: BlowupPolicy::default(),
            snapshot_cadence: Some(0.05),
            node_budget: 1_000_000,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self, dr: f64) -> Result<()> {
        if !(self.dt0 > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt0)));
        }
        if self.dt0 > self.cfl * dr * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dt",
                format!("dt = {} violates dt <= {}·dr = {}", self.dt0, self.cfl, self.cfl * dr),
            ));
        }
        if !(self.theta > 0.0) {
            return Err(Error::invalid("theta", "must be positive"));
        }
        if let Some(c) = self.snapshot_cadence {
            if !(c > 0.0) {
                return Err(Error::invalid("snapshot_cadence", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Grid reaching `r_max = 1 + t_max + 10·dr`. Data supported in the unit
/// ball cannot reach the outer boundary before `t_max`.
pub fn make_grid(params: &ProblemParams, dr: f64, node_budget: usize) -> Result<RadialGrid> {
    params.validate()?;
    if !(dr > 0.0 && dr.is_finite()) {
        return Err(Error::invalid("dr", format!("must be positive, got {dr}")));
    }
    let r_max = 1.0 + params.t_max + 10.0 * dr;
    let count = (r_max / dr).round() as usize + 1;
    if count > node_budget {
        return Err(Error::NodeBudget {
            requested: count,
            budget: node_budget,
            suggested_dr: r_max / (node_budget - 1) as f64,
        });
    }
    RadialGrid::new(dr, count, params.dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t_max: f64) -> ProblemParams {
        ProblemParams {
            dim: 1,
            p: 3.0,
            epsilon: 0.5,
            t_max,
            nonlinearity_on: true,
        }
    }

    #[test]
    fn grid_rule() {
        let g = make_grid(&params(10.0), 0.01, 1_000_000).unwrap();
        assert!((g.r_max() - 11.1).abs() < 1e-9);
        assert_eq!(g.len(), 1111);
        let g = make_grid(&params(0.0), 0.1, 1_000_000).unwrap();
        assert!((g.r_max() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn node_budget_guard() {
        let err = make_grid(&params(1e4), 0.001, 1_000_000).unwrap_err();
        match err {
            Error::NodeBudget { suggested_dr, .. } => {
                let retry = make_grid(&params(1e4), suggested_dr * 1.001, 1_000_000);
                assert!(retry.is_ok());
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn spec_rejects_bad_data() {
        let grid = RadialGrid::new(0.1, 30, 1).unwrap();
        let ok = RadialProfile::from_fn(&grid, |r| ProfileKind::Cone.eval(r)).unwrap();
        let wide = RadialProfile::from_fn(&grid, |r| (-r).exp()).unwrap();
        let negative = RadialProfile::from_fn(&grid, |r| -ProfileKind::Cone.eval(r)).unwrap();
        assert!(ProblemSpec::new(params(1.0), ok.clone(), ok.clone()).is_ok());
        assert!(ProblemSpec::new(params(1.0), wide, ok.clone()).is_err());
        assert!(ProblemSpec::new(params(1.0), ok.clone(), negative).is_err());
        let bad_p = ProblemParams { p: 1.0, ..params(1.0) };
        assert!(ProblemSpec::new(bad_p, ok.clone(), ok).is_err());
    }

    #[test]
    fn cfl_is_enforced() {
        let cfg = SchemeConfig {
            dt0: 0.06,
            ..Default::default()
        };
        assert!(cfg.validate(0.1).is_err());
        assert!(SchemeConfig::default().validate(0.05).is_ok());
    }
}
