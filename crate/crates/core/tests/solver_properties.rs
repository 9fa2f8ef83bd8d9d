use proptest::prelude::*;

use voi_core::aoi::Age;
use voi_core::estimator::CovarianceCache;
use voi_core::lqr::solve_riccati;
use voi_core::model::{DelayModel, ModelSpec, StepProbability, SystemModel};
use voi_core::solver::{solve_path_dp, solve_restricted_dp, PathSolverConfig};

fn scalar_model() -> impl Strategy<Value = SystemModel> {
    (
        0.6f64..1.25,
        0.3f64..1.5,
        0.2f64..2.0,
        0.05f64..1.0,
        0.0f64..2.0,
        2usize..16,
        0.1f64..40.0,
        0usize..4,
        0.0f64..1.0,
    )
        .prop_map(|(a, b, w, r, m0, n, theta, d, p)| {
            let delay = if d == 0 {
                DelayModel::None
            } else {
                DelayModel::BernoulliFixed {
                    d,
                    p: StepProbability::Constant(p),
                }
            };
            ModelSpec::scalar(a, b, w, 1.0, r, 0.0, m0, n, theta, delay)
                .validate()
                .unwrap()
        })
}

fn vector_model() -> impl Strategy<Value = SystemModel> {
    (0.8f64..1.1, 0.0f64..0.4, 2usize..10, 0.5f64..20.0, 1usize..3).prop_map(|(a, c, n, theta, d)| {
        let mut spec: ModelSpec =
            serde_json::from_str(include_str!("../../../configs/double_integrator.json")).unwrap();
        spec.A = vec![vec![a, c], vec![0.0, a]];
        spec.N = n;
        spec.theta = Some(theta);
        spec.delay = DelayModel::BernoulliFixed {
            d,
            p: StepProbability::Constant(0.5),
        };
        spec.validate().unwrap()
    })
}

fn ages(horizon: usize, zeta_cap: usize) -> Vec<(usize, Age)> {
    let mut out = Vec::new();
    for zeta in 0..=zeta_cap {
        out.push((zeta, Age::Infinite));
        for eta in zeta..=horizon + 1 {
            out.push((zeta, Age::Finite(eta)));
        }
    }
    out
}

fn check_restricted(model: &SystemModel) -> Result<(), TestCaseError> {
    let sched = solve_riccati(model).unwrap();
    let table = solve_restricted_dp(model, &sched).unwrap();
    let n = model.horizon();
    let theta = model.theta();
    for (zeta, eta) in ages(n, table.zeta_cap()) {
        prop_assert_eq!(table.value(n + 1, zeta, eta).unwrap(), 0.0);
        prop_assert_eq!(table.voi(n, zeta, eta).unwrap(), -theta);
        for k in 0..=n {
            let v = table.value(k, zeta, eta).unwrap();
            prop_assert!(v >= 0.0);
            let (idle, send) = table.branch_values(model, &sched, k, zeta, eta).unwrap();
            let tol = 1e-12 * v.abs().max(1.0);
            prop_assert!(
                (v - idle.min(send)).abs() <= tol,
                "V at k={} zeta={} {:?}",
                k,
                zeta,
                eta
            );
            let voi = table.voi(k, zeta, eta).unwrap();
            prop_assert!((voi - (idle - send)).abs() <= 1e-9 * idle.abs().max(1.0));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn restricted_bellman_holds_on_scalar_models(model in scalar_model()) {
        check_restricted(&model)?;
    }

    #[test]
    fn restricted_bellman_holds_on_vector_models(model in vector_model()) {
        check_restricted(&model)?;
    }

    #[test]
    fn idle_error_grows_with_controller_age(model in scalar_model()) {
        let n = model.horizon();
        let cache = CovarianceCache::new(&model, n + 1);
        for k in 0..=n {
            let mut prev = 0.0;
            for eta in 0..=k {
                let c = cache.idle_error_cov(Age::Finite(eta), k)[(0, 0)];
                prop_assert!(c >= prev - 1e-12 * c.abs().max(1.0));
                prev = c;
            }
            let inf = cache.idle_error_cov(Age::Infinite, k)[(0, 0)];
            prop_assert!(inf >= prev - 1e-12 * inf.abs().max(1.0));
        }
    }

    #[test]
    fn path_table_is_symmetric_with_fixed_terminal_step(model in scalar_model()) {
        let sched = solve_riccati(&model).unwrap();
        let cfg = PathSolverConfig { points_per_side: 60, ..PathSolverConfig::default() };
        let table = solve_path_dp(&model, &sched, &cfg).unwrap();
        let n = model.horizon();
        for zeta in 0..=table.zeta_cap() {
            prop_assert!(table.value_row(n + 1, zeta).unwrap().iter().all(|&v| v == 0.0));
            prop_assert!(table.voi_row(n, zeta).unwrap().iter().all(|&v| v == -model.theta()));
            for k in 0..=n {
                for row in [table.value_row(k, zeta).unwrap(), table.voi_row(k, zeta).unwrap()] {
                    let m = row.len();
                    for i in 0..m {
                        prop_assert_eq!(row[i].to_bits(), row[m - 1 - i].to_bits());
                    }
                }
                prop_assert!(table.value_row(k, zeta).unwrap().iter().all(|&v| v >= 0.0));
            }
        }
    }
}
