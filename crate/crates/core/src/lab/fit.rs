use std::fmt;

use crate::error::{Error, Result};
use crate::regression::linear_fit;

use super::LifespanRecord;

const MIN_POINTS: usize = 3;

/// Lifespan law and the coordinates it is fitted in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    /// `log T` against `ε^{−2/n}`.
    Critical { dim: usize },
    /// `log T` against `log ε`; target exponent `−1/(1/(p−1) − n/2)`.
    Subcritical { dim: usize, p: f64 },
    /// `log(1+T)` against `ε^{−α}`.
    OdeCritical { alpha: f64 },
    /// `log T` against `log ε`; target exponent `−α/(1−β)`.
    OdeSubcritical { alpha: f64, beta: f64 },
}

impl Law {
    pub fn name(&self) -> &'static str {
        match self {
            Law::Critical { .. } => "critical",
            Law::Subcritical { .. } => "subcritical",
            Law::OdeCritical { .. } => "ode_critical",
            Law::OdeSubcritical { .. } => "ode_subcritical",
        }
    }

    fn is_exponential(&self) -> bool {
        matches!(self, Law::Critical { .. } | Law::OdeCritical { .. })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Law::Critical { dim } => crate::grid::check_dim(dim),
            Law::Subcritical { dim, p } => {
                crate::grid::check_dim(dim)?;
                let critical = 1.0 + 2.0 / dim as f64;
                if !(p > 1.0 && p < critical) {
                    return Err(Error::NotSubcritical { p, critical });
                }
                Ok(())
            }
            Law::OdeCritical { alpha } if alpha > 0.0 => Ok(()),
            Law::OdeSubcritical { alpha, beta } if alpha > 0.0 && (0.0..1.0).contains(&beta) => Ok(()),
            _ => Err(Error::invalid("law", format!("inadmissible parameters {self:?}"))),
        }
    }

    /// Power of ε on the abscissa of exponential laws.
    fn abscissa_power(&self) -> f64 {
        match *self {
            Law::Critical { dim } => -2.0 / dim as f64,
            Law::OdeCritical { alpha } => -alpha,
            _ => f64::NAN,
        }
    }

    /// Theoretical lifespan exponent of the power laws.
    pub fn target_exponent(&self) -> Option<f64> {
        match *self {
            Law::Subcritical { dim, p } => Some(-1.0 / (1.0 / (p - 1.0) - dim as f64 / 2.0)),
            Law::OdeSubcritical { alpha, beta } => Some(-alpha / (1.0 - beta)),
            _ => None,
        }
    }

    fn coordinates(&self, epsilon: f64, t: f64) -> (f64, f64) {
        match self {
            Law::Critical { .. } => (epsilon.powf(self.abscissa_power()), t.ln()),
            Law::OdeCritical { .. } => (epsilon.powf(self.abscissa_power()), t.ln_1p()),
            Law::Subcritical { .. } | Law::OdeSubcritical { .. } => (epsilon.ln(), t.ln()),
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub law: Law,
    /// `C` for exponential laws, the fitted exponent for power laws.
    pub slope: f64,
    /// Intercept; `exp(offset)` is the prefactor of power laws.
    pub offset: f64,
    /// Abscissa exponent (`−2/n`, `−α`) or the fitted lifespan exponent.
    pub exponent: f64,
    pub target_exponent: Option<f64>,
    pub r_squared: f64,
    pub epsilons: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn prefactor(&self) -> f64 {
        self.offset.exp()
    }

    /// `|fitted/target − 1|` for power laws.
    pub fn exponent_error(&self) -> Option<f64> {
        self.target_exponent.map(|t| (self.exponent / t - 1.0).abs())
    }
}

/// Least squares fit of `law` over the fittable records.
pub fn fit_law(records: &[LifespanRecord], law: Law) -> Result<FitResult> {
    law.validate()?;
    let used: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.is_fittable())
        .filter_map(|r| r.t.map(|t| (r.epsilon, t)))
        .collect();
    if used.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            law: law.name(),
            needed: MIN_POINTS,
            found: used.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = used.iter().map(|&(e, t)| law.coordinates(e, t)).unzip();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::InsufficientData {
        law: law.name(),
        needed: MIN_POINTS,
        found: 1,
    })?;
    let exponent = if law.is_exponential() {
        law.abscissa_power()
    } else {
        fit.slope
    };
    Ok(FitResult {
        law,
        slope: fit.slope,
        offset: fit.intercept,
        exponent,
        target_exponent: law.target_exponent(),
        r_squared: fit.r_squared,
        epsilons: used.iter().map(|u| u.0).collect(),
        residuals: fit.residuals,
    })
}

pub fn fit_critical(records: &[LifespanRecord], dim: usize) -> Result<FitResult> {
    fit_law(records, Law::Critical { dim })
}

pub fn fit_subcritical(records: &[LifespanRecord], dim: usize, p: f64) -> Result<FitResult> {
    fit_law(records, Law::Subcritical { dim, p })
}

/// Relative change of the slope when each fittable record is dropped in
/// turn, in record order.
pub fn leave_one_out(records: &[LifespanRecord], law: Law) -> Result<Vec<f64>> {
    let full = fit_law(records, law)?;
    let mut out = Vec::new();
    for skip in (0..records.len()).filter(|&i| records[i].is_fittable()) {
        let rest: Vec<LifespanRecord> = records
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, r)| r.clone())
            .collect();
        let partial = fit_law(&rest, law)?;
        out.push((partial.slope / full.slope - 1.0).abs());
    }
    Ok(out)
}
