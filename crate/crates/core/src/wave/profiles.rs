//! Compactly supported, nonnegative initial data on the unit ball.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// `exp(1 − 1/(1 − r²))` on `r < 1`.
    Bump,
    /// `1 − r` on `r < 1`.
    Cone,
    /// 1 on `r ≤ ½`, smooth monotone cutoff to 0 at `r = 1`.
    Plateau,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] = [ProfileKind::Bump, ProfileKind::Cone, ProfileKind::Plateau];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Bump => "bump",
            ProfileKind::Cone => "cone",
            ProfileKind::Plateau => "plateau",
        }
    }

    pub fn eval(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            ProfileKind::Bump => (1.0 - 1.0 / (1.0 - r * r)).exp(),
            ProfileKind::Cone => 1.0 - r,
            ProfileKind::Plateau => {
                if r <= 0.5 {
                    1.0
                } else {
                    1.0 - smooth_step((r - 0.5) / 0.5)
                }
            }
        }
    }
}

/// C^∞ transition from 0 at `s ≤ 0` to 1 at `s ≥ 1`.
fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProfileKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownProfile(s.to_owned()))
    }
}

/// Samples the named profile pair `(f, g)` on `grid`. Both components use
/// the same shape, which keeps `f + g` a positive multiple of one profile.
pub fn sample_initial_profiles(name: &str, grid: &RadialGrid) -> Result<(RadialProfile, RadialProfile)> {
    let kind: ProfileKind = name.parse()?;
    let f = RadialProfile::from_fn(grid, |r| kind.eval(r))?;
    Ok((f.clone(), f))
}
