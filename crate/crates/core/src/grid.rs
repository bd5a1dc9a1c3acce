//! Uniform radial grids for radially symmetric functions on ℝⁿ.
//!
//! Nodes sit at `r_i = i·dr`. Integrals over ℝⁿ reduce to
//! `ω_n ∫ w(r) r^{n-1} dr`, discretized with the composite trapezoid rule;
//! the `r^{n-1}` factor makes the origin weight vanish for `n ≥ 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

/// Γ(k/2) for a positive integer `k`, from the integer and half-integer
/// closed forms.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k > 0, "Γ(0) is undefined");
    if k % 2 == 0 {
        // Γ(m) = (m-1)!
        (1..k / 2).map(f64::from).product()
    } else {
        // Γ(m + 1/2) = (m - 1/2)(m - 3/2)···(1/2)·√π
        let m = (k - 1) / 2;
        (0..m).map(|j| f64::from(j) + 0.5).product::<f64>() * PI.sqrt()
    }
}

/// Surface area of the unit sphere in ℝⁿ, `ω_n = 2π^{n/2}/Γ(n/2)`.
/// For `n = 1` this is 2, the two endpoints of the "sphere" {−1, 1}.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * PI.powf(n / 2.0) / gamma_half(dim as u32)
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::invalid("dim", format!("must lie in 1..={MAX_DIM}, got {dim}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dr: f64,
    dim: usize,
    weights: Arc<[f64]>,
    /// Interior Laplacian coefficients `(a_i, b_i)` with
    /// `Δ_h u_i = [a_i(u_{i+1} − u_i) − b_i(u_i − u_{i−1})] / dr²`.
    stencil: Arc<[(f64, f64)]>,
}

/// Finite-volume coefficients at node `i ≥ 1`: face areas `(i ± ½)^{n-1}`
/// over the shell volume `((i+½)^n − (i−½)^n)/n`, both scaled by `i^{n-1}`.
/// The volume is summed from its binomial expansion to avoid cancellation.
fn stencil_at(i: usize, dim: usize) -> (f64, f64) {
    let x = 0.5 / i as f64;
    let k = dim as i32 - 1;
    let mut volume = 0.0;
    let mut binom = 1.0;
    for j in 1..=dim {
        binom *= (dim + 1 - j) as f64 / j as f64;
        if j % 2 == 1 {
            volume += binom * x.powi(j as i32 - 1);
        }
    }
    volume /= dim as f64;
    ((1.0 + x).powi(k) / volume, (1.0 - x).powi(k) / volume)
}

impl RadialGrid {
    pub fn new(dr: f64, count: usize, dim: usize) -> Result<Self> {
        if !(dr.is_finite() && dr > 0.0) {
            return Err(Error::invalid("dr", format!("must be positive, got {dr}")));
        }
        if count < 3 {
            return Err(Error::invalid("count", format!("need at least 3 nodes, got {count}")));
        }
        check_dim(dim)?;
        let area = sphere_area(dim);
        let weights = (0..count)
            .map(|i| {
                let r = i as f64 * dr;
                let end = if i == 0 || i == count - 1 { 0.5 } else { 1.0 };
                end * dr * area * r.powi(dim as i32 - 1)
            })
            .collect();
        let stencil = (0..count).map(|i| if i == 0 { (0.0, 0.0) } else { stencil_at(i, dim) }).collect();
        Ok(Self {
            dr,
            dim,
            weights,
            stencil,
        })
    }

    /// Smallest grid of spacing `dr` whose last node is at or beyond `radius`.
    pub fn covering(radius: f64, dr: f64, dim: usize) -> Result<Self> {
        let count = (radius / dr).ceil() as usize + 1;
        Self::new(dr, count.max(3), dim)
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn radius(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.radius(self.len() - 1)
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.radius(i))
    }

    /// Trapezoid weights including the surface measure `ω_n r^{n-1}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Measure of the shell `r_{i-½} ≤ |x| ≤ r_{i+½}` (a ball of radius
    /// `dr/2` at the origin): the weights under which [`Self::laplacian`] is
    /// symmetric.
    pub fn cell_volume(&self, i: usize) -> f64 {
        let n = self.dim as i32;
        let area = sphere_area(self.dim);
        if i == 0 {
            return area * (0.5 * self.dr).powi(n) / n as f64;
        }
        let (up, _) = self.stencil[i];
        let x = 0.5 / i as f64;
        let scaled = (1.0 + x).powi(n - 1) / up;
        area * self.dr * self.radius(i).powi(n - 1) * scaled
    }

    /// `∫_{ℝⁿ} w(|x|) dx` by the trapezoid rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Discrete radial Laplacian `u_rr + (n-1)/r·u_r` on nodes `0..active`,
    /// written into `out`.
    ///
    /// Interior nodes use the finite-volume form
    /// `[r_{i+½}^{n-1}(u_{i+1}-u_i) − r_{i-½}^{n-1}(u_i-u_{i-1})] / (V_i dr)`
    /// with shell volume `V_i = (r_{i+½}^n − r_{i-½}^n)/n`; the origin
    /// (half-cell) gives `2n(u_1 − u_0)/dr²`. The last grid node carries the
    /// homogeneous boundary value and gets a zero Laplacian.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64], active: usize) {
        let count = self.len();
        let active = active.min(count);
        let inv_dr2 = 1.0 / (self.dr * self.dr);
        if active > 0 {
            out[0] = 2.0 * self.dim as f64 * (u[1] - u[0]) * inv_dr2;
        }
        let interior_end = active.min(count - 1);
        for i in 1..interior_end {
            let (up, down) = self.stencil[i];
            out[i] = (up * (u[i + 1] - u[i]) - down * (u[i] - u[i - 1])) * inv_dr2;
        }
        if active == count {
            out[count - 1] = 0.0;
        }
    }
}

/// A radial function sampled on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: f64::NAN, node });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Plain integral over ℝⁿ.
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}
