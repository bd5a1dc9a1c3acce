use std::fmt;

use crate::error::Result;
use crate::grid::RadialGrid;
use crate::heat_kernel::{heat_residual, kernel_mass, semigroup_residual, truncation_radius};

pub const MASS_TIMES: [f64; 3] = [0.1, 1.0, 10.0];
pub const MASS_TOLERANCE: f64 = 1e-8;
pub const SEMIGROUP_TOLERANCE: f64 = 1e-6;
pub const RESIDUAL_RATIO: (f64, f64) = (3.5, 4.5);

/// Radial spacing of the mass checks, relative to `√t`.
const MASS_DR: f64 = 2e-4;
const SEMIGROUP_DR: f64 = 0.02;
const RESIDUAL_DR: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelCheckKind {
    Mass,
    Semigroup,
    ResidualRatio,
}

impl KernelCheckKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelCheckKind::Mass => "mass",
            KernelCheckKind::Semigroup => "semigroup",
            KernelCheckKind::ResidualRatio => "heat_residual_ratio",
        }
    }
}

impl fmt::Display for KernelCheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub kind: KernelCheckKind,
    pub dim: usize,
    pub t: f64,
    /// `|mass − 1|`, the semigroup residual, or the residual ratio.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl KernelCheck {
    pub fn passed(&self) -> bool {
        (self.lower..=self.upper).contains(&self.value)
    }
}

/// Mass at `t ∈ {0.1, 1, 10}`, the semigroup residual at `(1, 2)` and the
/// heat-residual ratio under one halving of `dr` (at `t = 1`), per dimension.
pub fn kernel_suite(dims: &[usize]) -> Result<Vec<KernelCheck>> {
    let mut out = Vec::new();
    for &dim in dims {
        for t in MASS_TIMES {
            let grid = RadialGrid::covering(truncation_radius(t) * 1.05, MASS_DR * t.sqrt(), dim)?;
            let mass = kernel_mass(t, dim, &grid)?;
            out.push(KernelCheck {
                kind: KernelCheckKind::Mass,
                dim,
                t,
                value: (mass.value - 1.0).abs(),
                lower: 0.0,
                upper: MASS_TOLERANCE,
            });
        }
    }
    for &dim in dims {
        let grid = RadialGrid::covering(truncation_radius(3.0), SEMIGROUP_DR, dim)?;
        out.push(KernelCheck {
            kind: KernelCheckKind::Semigroup,
            dim,
            t: 1.0,
            value: semigroup_residual(1.0, 2.0, &grid)?,
            lower: 0.0,
            upper: SEMIGROUP_TOLERANCE,
        });
    }
    for &dim in dims {
        let coarse = heat_residual(1.0, &RadialGrid::covering(20.0, RESIDUAL_DR, dim)?)?;
        let fine = heat_residual(1.0, &RadialGrid::covering(20.0, 0.5 * RESIDUAL_DR, dim)?)?;
        out.push(KernelCheck {
            kind: KernelCheckKind::ResidualRatio,
            dim,
            t: 1.0,
            value: coarse / fine,
            lower: RESIDUAL_RATIO.0,
            upper: RESIDUAL_RATIO.1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_suite_passes() {
        let checks = kernel_suite(&[1]).unwrap();
        assert_eq!(checks.len(), 5);
        for c in &checks {
            assert!(c.passed(), "{} t={} value={}", c.kind, c.t, c.value);
        }
    }
}
