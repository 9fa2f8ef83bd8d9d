use std::sync::Arc;

use voi_core::lqr::solve_riccati;
use voi_core::model::{ModelSpec, SystemModel};
use voi_core::sim::{evaluate, signaling_residual_check, sweep, SweepFamily};
use voi_core::solver::{solve_restricted_dp, TriggerPolicy};

fn benchmark() -> SystemModel {
    ModelSpec::scalar_benchmark().validate().unwrap()
}

#[test]
fn regulation_falls_as_voi_policies_transmit_more() {
    let model = benchmark();
    let sched = solve_riccati(&model).unwrap();
    let thetas = vec![1000.0, 300.0, 100.0, 30.0, 10.0, 3.0, 1.0];
    let pts = sweep(&model, &sched, &SweepFamily::RestrictedTheta(thetas), 2_000, 5).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].rate.mean >= w[0].rate.mean, "rate not monotone in theta");
        let slack = 2.0 * (w[0].regulation.std_err.powi(2) + w[1].regulation.std_err.powi(2)).sqrt();
        assert!(
            w[1].regulation.mean <= w[0].regulation.mean + slack,
            "theta {} -> {}: regulation {} -> {}",
            w[0].parameter,
            w[1].parameter,
            w[0].regulation.mean,
            w[1].regulation.mean
        );
    }
}

#[test]
fn prohibitive_weight_silences_the_trigger() {
    let model = benchmark().with_theta(1e30).unwrap();
    let sched = solve_riccati(&model).unwrap();
    let table = Arc::new(solve_restricted_dp(&model, &sched).unwrap());
    let ev = evaluate(&model, &sched, &TriggerPolicy::RestrictedVoi(table), 200, 1).unwrap();
    assert_eq!(ev.report.rate.mean, 0.0);
    let never = evaluate(&model, &sched, &TriggerPolicy::Never, 200, 1).unwrap();
    assert_eq!(ev.report.regulation.mean, never.report.regulation.mean);
}

#[test]
fn signaling_check_separates_sign_blind_and_sign_aware_triggers() {
    let model = benchmark();
    let sched = solve_riccati(&model).unwrap();
    let table = Arc::new(solve_restricted_dp(&model, &sched).unwrap());
    let blind =
        signaling_residual_check(&model, &sched, &TriggerPolicy::RestrictedVoi(table), 3_000, 3, 10, 30).unwrap();
    assert!(blind.passed, "max |z| = {}", blind.max_abs_z);
    let aware = signaling_residual_check(&model, &sched, &TriggerPolicy::OneSided(0.0), 3_000, 3, 10, 30).unwrap();
    assert!(!aware.passed);
    assert!(aware.max_abs_z > 10.0);
}
