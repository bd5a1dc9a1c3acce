use std::f64::consts::PI;

use lifespan_core::functionals::{
    compute_a, compute_f, compute_g, compute_gamma_tilde, exp_weight_ratio, holder_constant,
};
use lifespan_core::wave::SolutionSnapshot;
use lifespan_core::RadialGrid;

fn snapshot(grid: &RadialGrid, t: f64, u: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> SolutionSnapshot {
    SolutionSnapshot {
        t,
        u: grid.nodes().map(&u).collect(),
        v: grid.nodes().map(&v).collect(),
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

/// Relative errors of `(G, A, F)` against the closed forms for Gaussian data.
fn gaussian_errors(dim: usize, dr: f64) -> [f64; 3] {
    let (a, t, p) = (0.6, 1.5, 2.5);
    let s = t + 1.0;
    let n = dim as f64;
    let grid = RadialGrid::covering(25.0, dr, dim).unwrap();
    let snap = snapshot(&grid, t, |r| (-r * r / (4.0 * a)).exp(), |r| 2.0 * (-r * r / (4.0 * a)).exp());
    let g = (4.0 * PI * s * a / (s + a)).powf(n / 2.0);
    let f = (4.0 * PI / (1.0 / s + p / a)).powf(n / (2.0 * p)) * s.powf(n * (p - 1.0) / (2.0 * p));
    [
        (compute_g(&snap, &grid) / g - 1.0).abs(),
        (compute_a(&snap, &grid) / (2.0 * g) - 1.0).abs(),
        (compute_f(&snap, &grid, p) / f - 1.0).abs(),
    ]
}

#[test]
fn gaussian_data_have_closed_form_functionals() {
    // odd n: the radial integrand extends evenly, so the rule is spectral
    for dim in [1, 3] {
        let err = gaussian_errors(dim, 0.05);
        assert!(err.iter().all(|e| *e < 1e-10), "dim {dim}: {err:?}");
    }
    // even n: at least second order in dr
    for dim in [2, 4] {
        let coarse = gaussian_errors(dim, 0.02);
        let fine = gaussian_errors(dim, 0.01);
        for k in 0..3 {
            assert!(coarse[k] < 1e-4, "dim {dim}: {coarse:?}");
            let ratio = coarse[k] / fine[k];
            assert!(ratio > 3.5, "dim {dim}: ratio {ratio}");
        }
    }
}

#[test]
fn holder_bound_holds_for_sign_changing_data() {
    let p = 1.8;
    for dim in 1..=3 {
        let grid = RadialGrid::covering(30.0, 0.02, dim).unwrap();
        for (k, t) in [0.0, 2.0, 9.0].into_iter().enumerate() {
            let snap = snapshot(&grid, t, |r| (r * (k + 1) as f64).cos() / (1.0 + r * r), |_| 0.0);
            let g = compute_g(&snap, &grid).abs();
            assert!(g <= holder_constant(dim, p) * compute_f(&snap, &grid, p), "dim {dim} t {t}");
        }
    }
}

/// `γ̃(t) − ε = ∫_0^t K(τ, t) q(τ) dτ` after swapping the integrals, with
/// `K = e^{−t}[(e^t − e^m) − e^τ (t − m)]`, `m = max(τ, t0)`.
fn gamma_by_kernel(t: f64, t0: f64, q: &impl Fn(f64) -> f64) -> f64 {
    let kernel = |tau: f64| {
        let m = tau.max(t0);
        (1.0 - (m - t).exp()) - (tau - t).exp() * (t - m)
    };
    simpson(|tau| kernel(tau) * q(tau), 0.0, t, 20_000)
}

/// Largest relative error of `γ̃` on samples of spacing `dt`.
fn gamma_error(dt: f64) -> f64 {
    let (eps, p, t0) = (0.3, 2.0, 0.5);
    let f = |t: f64| 0.4 + 0.1 * (0.7 * t).sin();
    let q = |t: f64| f(t).powf(p) / (1.0 + t);
    let steps = (8.0 / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let fs: Vec<f64> = times.iter().map(|&t| f(t)).collect();
    let gamma = compute_gamma_tilde(&times, &fs, t0, eps, p).unwrap();
    assert_eq!(gamma.start, (t0 / dt).round() as usize);
    assert_eq!(gamma.values[0], eps);
    [1.0, 3.0, 8.0]
        .into_iter()
        .map(|t| {
            let exact = eps + gamma_by_kernel(t, t0, &q);
            let got = gamma.at((t / dt).round() as usize).unwrap();
            (got / exact - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn gamma_tilde_matches_swapped_integral() {
    let coarse = gamma_error(0.02);
    let fine = gamma_error(0.01);
    assert!(fine < 2e-6, "{fine:e}");
    assert!(coarse / fine > 3.5, "{coarse:e} / {fine:e}");
}

#[test]
fn gamma_tilde_rejects_anchor_outside_samples() {
    let times = [0.0, 0.1, 0.2];
    let f = [1.0, 1.0, 1.0];
    assert!(compute_gamma_tilde(&times, &f, 0.5, 1.0, 2.0).is_err());
    assert!(compute_gamma_tilde(&times, &f[..2], 0.0, 1.0, 2.0).is_err());
}

#[test]
fn exp_weight_ratio_against_simpson() {
    for t in [0.5, 2.0, 7.0, 30.0] {
        let direct = (1.0 + t) * simpson(|tau| (tau - t).exp() / (1.0 + tau), 0.0, t, 40_000);
        let got = exp_weight_ratio(t).unwrap();
        assert!((got - direct).abs() < 1e-10, "t {t}: {got} vs {direct}");
    }
    assert_eq!(exp_weight_ratio(0.0).unwrap(), 0.0);
    // e^{−t}∫e^τ/(1+τ) = 1/(1+t) + 1/(1+t)² + O(t^{-3})
    let t = 500.0;
    let r = exp_weight_ratio(t).unwrap();
    assert!((r - (1.0 + 1.0 / (1.0 + t))).abs() < 3.0 / (t * t));
    assert!(exp_weight_ratio(-1.0).is_err());
}
