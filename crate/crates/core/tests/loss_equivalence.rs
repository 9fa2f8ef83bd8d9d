//! The rate-regulation loss and the error-weighted loss differ by a
//! policy-independent term.

use std::sync::Arc;

use nalgebra::DVector;
use voi_core::lqr::solve_riccati;
use voi_core::model::{ModelSpec, SystemModel};
use voi_core::sim::{evaluate, paired_difference, run_scenario, Scenario};
use voi_core::solver::{solve_restricted_dp, TriggerPolicy};

fn tradeoff_model() -> SystemModel {
    ModelSpec::from_json_str(include_str!("../../../configs/benchmark_tradeoff.json"))
        .unwrap()
        .validate()
        .unwrap()
}

fn quad(m: &nalgebra::DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

#[test]
fn per_run_cost_decomposition_is_exact() {
    let model = tradeoff_model();
    let sched = solve_riccati(&model).unwrap();
    let table = Arc::new(solve_restricted_dp(&model, &sched).unwrap());
    let policies = [
        TriggerPolicy::AlwaysOn,
        TriggerPolicy::Never,
        TriggerPolicy::Periodic(10),
        TriggerPolicy::AoiThreshold(6),
        TriggerPolicy::RestrictedVoi(table),
    ];
    for run in 0..20 {
        let scenario = Scenario::draw(&model, 11, run);
        for policy in &policies {
            let rec = run_scenario(&model, &sched, policy, &scenario).unwrap();
            let regulation: f64 = rec.steps.iter().map(|s| s.regulation_cost).sum();
            let x0 = &rec.steps[0].x;
            let mut rhs = quad(&(sched.s(0) - model.q()), x0);
            for s in &rec.steps {
                let s_next = sched.s(s.k + 1);
                let drift = model.a() * &s.x + model.b() * &s.u;
                rhs += s.error_cost + 2.0 * s.w.dot(&(s_next * drift)) + quad(s_next, &s.w);
            }
            let scale = regulation.abs().max(1.0);
            assert!(
                (regulation - rhs).abs() <= 1e-9 * scale,
                "{} run {run}: {regulation} vs {rhs}",
                policy.label()
            );
        }
    }
}

#[test]
fn loss_differences_agree_in_expectation() {
    let model = tradeoff_model();
    let sched = solve_riccati(&model).unwrap();
    let lambda = model.lambda().unwrap();
    let steps = (model.horizon() + 1) as f64;
    let table = Arc::new(solve_restricted_dp(&model, &sched).unwrap());
    let policies = [
        TriggerPolicy::AlwaysOn,
        TriggerPolicy::Never,
        TriggerPolicy::RestrictedVoi(table),
    ];
    let gaps: Vec<Vec<f64>> = policies
        .iter()
        .map(|p| {
            let ev = evaluate(&model, &sched, p, 2_000, 21).unwrap();
            ev.phi_samples(&model)
                .iter()
                .zip(ev.psi_samples())
                .map(|(phi, psi)| phi * steps / lambda - psi)
                .collect()
        })
        .collect();
    for i in 0..gaps.len() {
        for j in i + 1..gaps.len() {
            let d = paired_difference(&gaps[i], &gaps[j]);
            // three pairs, two-sided 95% after Bonferroni
            let half = 2.394 * d.std_err;
            assert!(d.mean.abs() <= half, "pair ({i}, {j}): {} +- {half}", d.mean);
        }
    }
}
