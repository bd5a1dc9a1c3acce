//! The n-dimensional heat kernel `E(t, x) = (4πt)^{-n/2} exp(−|x|²/4t)` and
//! Gaussian-weighted radial quadrature.
//!
//! Everything here is radial: functions are sampled on a [`RadialGrid`] and
//! integrals over ℝⁿ use the grid's trapezoid weights.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::grid::{check_dim, sphere_area, RadialGrid, RadialProfile};

/// Weight floor below which the Gaussian is treated as zero.
pub const WEIGHT_FLOOR: f64 = 1e-16;

/// Radius beyond which `exp(−r²/4t)` drops below [`WEIGHT_FLOOR`].
pub fn truncation_radius(t: f64) -> f64 {
    2.0 * (t * (1.0 / WEIGHT_FLOOR).ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    t: f64,
    r: f64,
    dim: usize,
}

impl KernelPoint {
    pub fn new(t: f64, r: f64, dim: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", format!("must be positive, got {t}")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid("r", format!("must be nonnegative, got {r}")));
        }
        check_dim(dim)?;
        Ok(Self { t, r, dim })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

pub fn eval_kernel(p: KernelPoint) -> f64 {
    heat_kernel(p.t, p.r, p.dim)
}

/// Unchecked `E(t, r)`.
#[inline]
pub fn heat_kernel(t: f64, r: f64, dim: usize) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

/// `∂_t E(t, r) = E(t, r)·(r²/4t² − n/2t)`.
#[inline]
pub fn heat_kernel_dt(t: f64, r: f64, dim: usize) -> f64 {
    heat_kernel(t, r, dim) * (r * r / (4.0 * t * t) - dim as f64 / (2.0 * t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassReport {
    /// Trapezoid quadrature of `E(t, ·)` over the grid.
    pub value: f64,
    /// Exact Gaussian mass beyond the grid's last node.
    pub truncation_error: f64,
    /// Whether the grid stops short of [`truncation_radius`].
    pub truncated: bool,
}

/// Quadrature of `∫_{ℝⁿ} E(t, x) dx`.
pub fn kernel_mass(t: f64, dim: usize, grid: &RadialGrid) -> Result<MassReport> {
    KernelPoint::new(t, 0.0, dim)?;
    if grid.dim() != dim {
        return Err(Error::invalid("grid", "grid dimension differs from dim"));
    }
    let value = moment(grid, &Constant(1.0), t, 0) * (4.0 * PI * t).powf(-(dim as f64) / 2.0);
    let r_max = grid.r_max();
    // P(|X| > R) for X ~ N(0, 2t·I_n) is Q(n/2, R²/4t)
    let truncation_error = statrs::function::gamma::gamma_ur(dim as f64 / 2.0, r_max * r_max / (4.0 * t));
    Ok(MassReport {
        value,
        truncation_error,
        truncated: r_max < truncation_radius(t),
    })
}

/// Samples of a radial function, possibly shorter than the grid (missing
/// trailing samples are zero).
pub(crate) trait Samples {
    fn len_hint(&self, grid_len: usize) -> usize;
    fn at(&self, i: usize) -> f64;
}

impl Samples for [f64] {
    fn len_hint(&self, grid_len: usize) -> usize {
        self.len().min(grid_len)
    }

    #[inline]
    fn at(&self, i: usize) -> f64 {
        self[i]
    }
}

pub(crate) struct Constant(pub f64);

impl Samples for Constant {
    fn len_hint(&self, grid_len: usize) -> usize {
        grid_len
    }

    #[inline]
    fn at(&self, _: usize) -> f64 {
        self.0
    }
}

/// Maps samples through `|x|^p` on the fly.
pub(crate) struct AbsPow<'a>(pub &'a [f64], pub f64);

impl Samples for AbsPow<'_> {
    fn len_hint(&self, grid_len: usize) -> usize {
        self.0.len().min(grid_len)
    }

    #[inline]
    fn at(&self, i: usize) -> f64 {
        self.0[i].abs().powf(self.1)
    }
}

/// Nodes between exact `exp` evaluations; in between the Gaussian is
/// advanced by the recurrence `g_{i+1} = g_i·q^{2i+1}`, `q = e^{−dr²/4s}`.
const EXP_BLOCK: usize = 32;

/// Calls `visit(i, W_i·exp(−r_i²/4s))` for `i < len`, stopping once the
/// Gaussian underflows.
#[inline]
fn for_each_gaussian_weight(grid: &RadialGrid, len: usize, s: f64, mut visit: impl FnMut(usize, f64)) {
    let weights = grid.weights();
    let dr = grid.dr();
    let c = dr * dr / (4.0 * s);
    let q2 = (-2.0 * c).exp();
    let mut start = 0;
    while start < len {
        let end = (start + EXP_BLOCK).min(len);
        let i0 = start as f64;
        let mut gauss = (-c * i0 * i0).exp();
        if gauss == 0.0 {
            break;
        }
        let mut ratio = (-c * (2.0 * i0 + 1.0)).exp();
        for (i, w) in weights.iter().enumerate().take(end).skip(start) {
            visit(i, w * gauss);
            gauss *= ratio;
            ratio *= q2;
        }
        start = end;
    }
}

/// `Σ_i W_i exp(−r_i²/4s) r_i^m w_i`: the radial trapezoid rule for
/// `∫ e^{−|x|²/4s} |x|^m w(|x|) dx`.
pub(crate) fn moment(grid: &RadialGrid, w: &(impl Samples + ?Sized), s: f64, m: i32) -> f64 {
    let dr = grid.dr();
    let mut total = 0.0;
    for_each_gaussian_weight(grid, w.len_hint(grid.len()), s, |i, g| {
        let radial = if m == 0 { 1.0 } else { (i as f64 * dr).powi(m) };
        total += g * radial * w.at(i);
    });
    total
}

/// Zeroth and second Gaussian moments `(M_0, M_2)` at scale `s` of up to
/// `K` fields in a single sweep. Fields may be shorter than the grid.
pub(crate) fn gaussian_moments<const K: usize>(grid: &RadialGrid, fields: [&[f64]; K], s: f64) -> [(f64, f64); K] {
    let len = fields.iter().map(|f| f.len()).max().unwrap_or(0).min(grid.len());
    let dr2 = grid.dr() * grid.dr();
    let mut out = [(0.0, 0.0); K];
    for_each_gaussian_weight(grid, len, s, |i, g| {
        let r2 = (i * i) as f64 * dr2;
        for (acc, field) in out.iter_mut().zip(&fields) {
            if let Some(&v) = field.get(i) {
                let gv = g * v;
                acc.0 += gv;
                acc.1 += gv * r2;
            }
        }
    });
    out
}

/// `∫_{ℝⁿ} e^{−|x|²/4s} |x|^m w(|x|) dx` by radial quadrature.
pub fn weighted_moment(w: &RadialProfile, s: f64, m: u32) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", format!("scale must be positive, got {s}")));
    }
    Ok(moment(w.grid(), w.values(), s, m as i32))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convolution {
    pub profile: RadialProfile,
    /// Set when the kernel width `√(2t)` is under-resolved by the grid.
    pub under_resolved: bool,
}

/// Angular nodes for the sphere average at `a = rρ/2t`. For even `n` the
/// integrand `exp(−a(1 − cos θ)) sin^{n-2} θ` extends to a smooth periodic
/// function, so the trapezoid rule converges spectrally once its width
/// `~1/√a` is resolved.
fn angular_nodes(a: f64) -> usize {
    32 + (12.0 * a.sqrt()).ceil() as usize
}

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(48).expect("nonzero degree")))
}

/// `∫_0^π exp(−a(1 − cos θ)) sin^{n-2} θ dθ` for odd `n ≥ 3`. With
/// `y = 1 − cos θ` it becomes `∫_0^2 e^{−ay} (y(2 − y))^{(n-3)/2} dy`, a
/// polynomial against an exponential, cut where `e^{−ay} < e^{−40}`.
fn odd_angular_integral(a: f64, dim: usize) -> f64 {
    let k = (dim as i32 - 3) / 2;
    let end = (40.0 / a).min(2.0);
    legendre().integrate(0.0, end, |y| (-a * y).exp() * (y * (2.0 - y)).powi(k))
}

/// Average of `E(t, |x − y|)` over `|y| = ρ` with `|x| = r`.
/// `angles` caches `(1 − cos θ_k, trapezoid weight × Jacobian)` between
/// calls with the same node count.
fn sphere_average(t: f64, r: f64, rho: f64, dim: usize, angles: &mut Vec<(f64, f64)>) -> f64 {
    let base = heat_kernel(t, r - rho, dim);
    if base == 0.0 {
        return 0.0;
    }
    if dim == 1 {
        return 0.5 * (base + heat_kernel(t, r + rho, dim));
    }
    let a = r * rho / (2.0 * t);
    if a == 0.0 {
        return base;
    }
    let ratio = sphere_area(dim - 1) / sphere_area(dim);
    if dim % 2 == 1 {
        return base * ratio * odd_angular_integral(a, dim);
    }
    let m = angular_nodes(a);
    let h = PI / m as f64;
    if angles.len() != m + 1 {
        angles.clear();
        angles.extend((0..=m).map(|k| {
            let theta = k as f64 * h;
            let end = if k == 0 || k == m { 0.5 } else { 1.0 };
            let jacobian = if dim == 2 { 1.0 } else { theta.sin().powi(dim as i32 - 2) };
            (1.0 - theta.cos(), end * jacobian)
        }));
    }
    let sum: f64 = angles.iter().map(|(c, w)| w * (-a * c).exp()).sum();
    base * ratio * sum * h
}

/// `E(t) ∗ w` for radial `w`, by direct quadrature over radius and polar
/// angle.
pub fn convolve_with_kernel(w: &RadialProfile, t: f64) -> Result<Convolution> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be positive, got {t}")));
    }
    let grid = w.grid();
    let dim = grid.dim();
    let weights = grid.weights();
    let sources: Vec<(f64, f64)> = w
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (grid.radius(j), weights[j] * v))
        .collect();
    let mut scratch = Vec::new();
    let values = grid
        .nodes()
        .map(|r| {
            sources
                .iter()
                .map(|&(rho, wv)| wv * sphere_average(t, r, rho, dim, &mut scratch))
                .sum()
        })
        .collect();
    let dr = grid.dr();
    Ok(Convolution {
        profile: RadialProfile::new(grid.clone(), values)?,
        under_resolved: t < 4.0 * dr * dr,
    })
}

fn kernel_profile(grid: &RadialGrid, t: f64) -> Result<RadialProfile> {
    let dim = grid.dim();
    RadialProfile::from_fn(grid, |r| heat_kernel(t, r, dim))
}

/// `max_i |(E(t) ∗ E(s))(r_i) − E(t + s, r_i)|` over `grid`.
pub fn semigroup_residual(t: f64, s: f64, grid: &RadialGrid) -> Result<f64> {
    KernelPoint::new(t, 0.0, grid.dim())?;
    KernelPoint::new(s, 0.0, grid.dim())?;
    let conv = convolve_with_kernel(&kernel_profile(grid, t)?, s)?;
    let dim = grid.dim();
    Ok(conv
        .profile
        .values()
        .iter()
        .zip(grid.nodes())
        .map(|(c, r)| (c - heat_kernel(t + s, r, dim)).abs())
        .fold(0.0, f64::max))
}

/// Per-node finite-difference residual `E_t − Δ_h E` at time `t`, with a
/// centered time difference of width `dr` and the solver's radial
/// Laplacian. The outer boundary node is excluded.
pub fn heat_residual_profile(t: f64, grid: &RadialGrid) -> Result<Vec<f64>> {
    let dr = grid.dr();
    if !(t > 2.0 * dr) {
        return Err(Error::invalid("t", format!("must exceed 2·dr = {}, got {t}", 2.0 * dr)));
    }
    let dim = grid.dim();
    let now: Vec<f64> = grid.nodes().map(|r| heat_kernel(t, r, dim)).collect();
    let mut lap = vec![0.0; grid.len()];
    grid.laplacian(&now, &mut lap, grid.len());
    let res = grid
        .nodes()
        .zip(&lap)
        .take(grid.len() - 1)
        .map(|(r, l)| {
            let dt = (heat_kernel(t + dr, r, dim) - heat_kernel(t - dr, r, dim)) / (2.0 * dr);
            dt - l
        })
        .collect();
    Ok(res)
}

/// Max norm of [`heat_residual_profile`].
pub fn heat_residual(t: f64, grid: &RadialGrid) -> Result<f64> {
    Ok(heat_residual_profile(t, grid)?.iter().fold(0.0, |m, r| m.max(r.abs())))
}
