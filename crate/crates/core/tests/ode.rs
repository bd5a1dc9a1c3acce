use lifespan_core::ode_blowup::{integrate, sweep, OdeConfig, OdeMode, OdeParams, OdeStatus};

fn params(alpha: f64, beta: f64, c0: f64, i0: f64) -> OdeParams {
    OdeParams {
        alpha,
        beta,
        c0,
        i0,
        i0_prime: 0.0,
    }
}

fn lifespan(p: &OdeParams, mode: OdeMode) -> f64 {
    let out = integrate(p, mode, &OdeConfig::default()).unwrap();
    assert_eq!(out.status, OdeStatus::BlewUp, "{p:?}");
    out.t_blowup.unwrap()
}

#[test]
fn riccati_with_constant_coefficient() {
    // I' = 2 I², I(0) = 0.25 blows up at 1/(2·0.25) = 2
    let t = lifespan(&params(1.0, 0.0, 2.0, 0.25), OdeMode::FirstOrder);
    assert!((t - 2.0).abs() < 1e-6, "{t}");
}

#[test]
fn second_order_agrees_with_halved_tolerance() {
    let p = params(0.5, 1.0, 1.0, 0.8);
    let coarse = integrate(&p, OdeMode::SecondOrder, &OdeConfig::default()).unwrap();
    let fine = integrate(
        &p,
        OdeMode::SecondOrder,
        &OdeConfig {
            tol: 1e-11,
            ..OdeConfig::default()
        },
    )
    .unwrap();
    let (a, b) = (coarse.t_blowup.unwrap(), fine.t_blowup.unwrap());
    assert!((a / b - 1.0).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn inertia_delays_blow_up() {
    // I'' + I' = S with I'(0) = 0 starts slower than I' = S
    for (alpha, beta, i0) in [(0.5, 1.0, 1.0), (1.0, 0.0, 0.5), (0.4, 0.5, 0.7)] {
        let p = params(alpha, beta, 1.0, i0);
        assert!(lifespan(&p, OdeMode::SecondOrder) > lifespan(&p, OdeMode::FirstOrder));
    }
}

#[test]
fn lifespan_decreases_with_data_and_coefficient() {
    let mut last = f64::INFINITY;
    for i0 in [0.4, 0.6, 0.8, 1.0, 1.5] {
        let t = lifespan(&params(0.5, 1.0, 1.0, i0), OdeMode::SecondOrder);
        assert!(t < last);
        last = t;
    }
    let slow = lifespan(&params(0.5, 0.5, 1.0, 0.5), OdeMode::SecondOrder);
    let fast = lifespan(&params(0.5, 0.5, 3.0, 0.5), OdeMode::SecondOrder);
    assert!(fast < slow);
}

#[test]
fn short_horizon_survives() {
    let out = integrate(
        &params(0.5, 1.0, 1.0, 0.5),
        OdeMode::SecondOrder,
        &OdeConfig {
            horizon: 1.0,
            ..OdeConfig::default()
        },
    )
    .unwrap();
    assert_eq!(out.status, OdeStatus::HorizonReached);
    assert!(out.t_blowup.is_none());
    let (t, i, _) = *out.trajectory.last().unwrap();
    assert!((t - 1.0).abs() < 1e-12 && i > 0.5);
}

#[test]
fn sweep_orders_by_decreasing_epsilon() {
    let out = sweep(
        &params(0.5, 1.0, 1.0, 1.0),
        OdeMode::SecondOrder,
        &[0.5, 1.0, 0.7],
        &OdeConfig::default(),
    )
    .unwrap();
    let eps: Vec<f64> = out.iter().map(|(e, _)| *e).collect();
    assert_eq!(eps, [1.0, 0.7, 0.5]);
    assert!(out.windows(2).all(|w| w[0].1.t_blowup < w[1].1.t_blowup));
}

#[test]
fn invalid_parameters_are_rejected() {
    let cfg = OdeConfig::default();
    assert!(integrate(&params(0.0, 1.0, 1.0, 1.0), OdeMode::FirstOrder, &cfg).is_err());
    assert!(integrate(&params(0.5, 1.0, 1.0, -1.0), OdeMode::FirstOrder, &cfg).is_err());
    assert!(integrate(&params(0.5, 1.0, 0.0, 1.0), OdeMode::FirstOrder, &cfg).is_err());
}
