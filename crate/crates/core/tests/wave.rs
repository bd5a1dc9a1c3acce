use lifespan_core::wave::{make_grid, run, BlowupStatus, ProblemParams, ProblemSpec, ProfileKind, SchemeConfig};
use lifespan_core::RadialGrid;

/// `∫u` over a snapshot, which stores only the discrete support.
fn mass(grid: &RadialGrid, u: &[f64]) -> f64 {
    grid.weights().iter().zip(u).map(|(w, v)| w * v).sum()
}

fn spec(dim: usize, p: f64, epsilon: f64, t_max: f64, nonlinear: bool, profile: ProfileKind) -> ProblemSpec {
    let params = ProblemParams {
        dim,
        p,
        epsilon,
        t_max,
        nonlinearity_on: nonlinear,
    };
    let grid = make_grid(&params, 0.05, 1_000_000).unwrap();
    ProblemSpec::with_profile(params, profile, &grid).unwrap()
}

/// `∫u` of the linear equation obeys `M'' + M' = 0`:
/// `M(t) = ε∫f + ε∫g (1 − e^{−t})`.
#[test]
fn linear_mass_follows_its_ode() {
    for dim in [1, 2, 3] {
        let s = spec(dim, 2.0, 0.5, 3.0, false, ProfileKind::Plateau);
        let grid = s.grid().clone();
        let (m0, m1) = (0.5 * grid.integrate(s.f.values()), 0.5 * grid.integrate(s.g.values()));
        let config = SchemeConfig {
            dt0: 0.01,
            snapshot_cadence: Some(0.5),
            ..SchemeConfig::default()
        };
        let (snaps, report) = run(&s, &config).unwrap();
        assert_eq!(report.status, BlowupStatus::Survived);
        for snap in &snaps {
            let exact = m0 + m1 * (1.0 - (-snap.t).exp());
            let got = mass(&grid, &snap.u);
            assert!((got / exact - 1.0).abs() < 2e-3, "dim {dim} t {}: {got} vs {exact}", snap.t);
        }
    }
}

/// With a nonnegative source the mass dominates the linear one.
#[test]
fn nonlinear_mass_dominates_linear() {
    let s = spec(2, 2.0, 1.0, 4.0, true, ProfileKind::Bump);
    let lin = spec(2, 2.0, 1.0, 4.0, false, ProfileKind::Bump);
    let config = SchemeConfig {
        snapshot_cadence: Some(1.0),
        ..SchemeConfig::default()
    };
    let (a, _) = run(&s, &config).unwrap();
    let (b, _) = run(&lin, &config).unwrap();
    let grid = s.grid();
    for (x, y) in a.iter().zip(&b).skip(1) {
        assert!(mass(grid, &x.u) > mass(grid, &y.u), "t {}", x.t);
    }
}

#[test]
fn large_data_blow_up_early() {
    let s = spec(1, 3.0, 1.0, 50.0, true, ProfileKind::Plateau);
    let config = SchemeConfig {
        snapshot_cadence: None,
        ..SchemeConfig::default()
    };
    let (_, report) = run(&s, &config).unwrap();
    assert_eq!(report.status, BlowupStatus::BlewUp);
    let t = report.t_est.unwrap();
    assert!(t > 0.5 && t < 20.0, "{t}");
}

#[test]
fn unsupported_inputs_are_rejected() {
    let params = ProblemParams {
        dim: 1,
        p: 1.0,
        epsilon: 1.0,
        t_max: 1.0,
        nonlinearity_on: true,
    };
    assert!(make_grid(&params, 0.02, 1_000_000).is_err());
    let ok = ProblemParams { p: 2.0, ..params };
    assert!(make_grid(&ProblemParams { t_max: 1e6, ..ok }, 0.02, 1000).is_err());
    let grid = make_grid(&ok, 0.02, 1_000_000).unwrap();
    assert!(ProblemSpec::with_profile_scaled(ok, ProfileKind::Cone, &grid, -1.0).is_err());
    let config = SchemeConfig {
        dt0: 1.0,
        ..SchemeConfig::default()
    };
    assert!(config.validate(0.02).is_err());
}
