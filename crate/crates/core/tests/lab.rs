use lifespan_core::lab::{
    emit_report, fit_law, leave_one_out, read_records, run_experiment, summary_path, ExperimentSpec, Law,
    LifespanRecord, Model, OdeSettings, ReportMeta, RunStatus, Source,
};

fn record(epsilon: f64, t: f64) -> LifespanRecord {
    LifespanRecord {
        epsilon,
        t: Some(t),
        status: RunStatus::BlewUp,
        source: Source::Pde,
        dim: Some(2),
        p: 2.0,
        refine: 0,
        non_monotone: false,
        steps: 100,
        error: None,
    }
}

#[test]
fn critical_law_recovers_synthetic_constant() {
    // T = exp(C ε^{−2/n}) with n = 2, C = 0.8
    let records: Vec<_> = [0.9, 0.7, 0.5, 0.4].iter().map(|&e| record(e, (0.8 / e).exp())).collect();
    let fit = fit_law(&records, Law::Critical { dim: 2 }).unwrap();
    assert!((fit.slope - 0.8).abs() < 1e-12);
    assert!(fit.offset.abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!(leave_one_out(&records, Law::Critical { dim: 2 }).unwrap().iter().all(|d| d.abs() < 1e-10));
}

#[test]
fn subcritical_law_recovers_synthetic_exponent() {
    // n = 1, p = 2: T ~ ε^{−2}
    let records: Vec<_> = [0.4, 0.2, 0.1, 0.05].iter().map(|&e| record(e, 3.0 * e.powi(-2))).collect();
    let fit = fit_law(&records, Law::Subcritical { dim: 1, p: 2.0 }).unwrap();
    assert!((fit.exponent + 2.0).abs() < 1e-12);
    assert!(fit.exponent_error().unwrap().abs() < 1e-12);
    assert!((fit.prefactor() - 3.0).abs() < 1e-10);
}

#[test]
fn survivors_and_failures_are_not_fitted() {
    let mut records: Vec<_> = [0.9, 0.7, 0.5].iter().map(|&e| record(e, (1.0 / e).exp())).collect();
    records.push(LifespanRecord {
        t: None,
        status: RunStatus::Survived,
        ..record(0.3, 0.0)
    });
    let fit = fit_law(&records, Law::Critical { dim: 2 }).unwrap();
    assert_eq!(fit.epsilons, [0.9, 0.7, 0.5]);
    records.truncate(2);
    assert!(fit_law(&records, Law::Critical { dim: 2 }).is_err());
}

#[test]
fn ode_sweep_fits_and_round_trips_through_report() {
    let spec = ExperimentSpec {
        model: Model::Ode(OdeSettings::default()),
        epsilons: vec![0.4, 1.0, 0.6, 0.8, 0.5],
        refine: 0,
        workers: 1,
        seed: 0,
    };
    let records = run_experiment(&spec).unwrap();
    let eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    assert_eq!(eps, [1.0, 0.8, 0.6, 0.5, 0.4]);
    assert!(records.iter().all(|r| r.status == RunStatus::BlewUp && r.source == Source::Ode));
    let fit = fit_law(&records, Law::OdeCritical { alpha: 0.5 }).unwrap();
    assert!(fit.r_squared > 0.99 && fit.slope > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ode.csv");
    let mut meta = ReportMeta::default();
    meta.push("alpha", 0.5);
    emit_report(&records, &[fit], &meta, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("epsilon,T,status,source,dim,p\n"));
    let back = read_records(&text).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert_eq!(a.epsilon, b.epsilon);
        assert_eq!(a.t, b.t);
        assert_eq!(a.status, b.status);
    }
    let summary = std::fs::read_to_string(summary_path(&path)).unwrap();
    assert!(summary.contains("[fit]") && summary.contains("alpha"));
}
