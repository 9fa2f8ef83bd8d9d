//! Closed-loop simulation of process, event trigger, one-step channel and
//! certainty-equivalent controller.
//!
//! Per step `k`:
//! 1. the delay `tau_k` arrives and the trigger ages are updated;
//! 2. the trigger forms `x_check_k` and the mismatch against `x_hat_k`;
//! 3. the policy decides `delta_k`;
//! 4. the controller, holding only what was sent at `k - 1` or earlier,
//!    applies `u_k = -L_k x_hat_k`;
//! 5. the process steps.
//!
//! A transmission at `k` reaches the controller at `k + 1`.

mod evaluate;
mod sweep;

pub use evaluate::{
    evaluate, paired_difference, signaling_residual_check, Estimate, Evaluation, LossReport, RunSummary,
    SignalingBucket, SignalingReport,
};
pub use sweep::{sweep, SweepFamily, SweepPoint};

use nalgebra::DVector;
use serde::Serialize;

use crate::aoi::{update_eta, update_zeta, Age};
use crate::error::{Result, VoiError};
use crate::estimator::{controller_update, error_recursion, trigger_mmse, ErrorState};
use crate::lqr::{control_input, LqrSchedule};
use crate::model::{
    sample_delay, sample_initial_state, sample_noise, sample_output, step_dynamics, SimRng, SystemModel,
};
use crate::solver::{Snapshot, TriggerPolicy};

/// All randomness of one run, drawn up front so that different policies can
/// be compared on identical noise and delay sequences.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub x0: DVector<f64>,
    /// `tau_k` for `k = 0..=N`.
    pub delays: Vec<usize>,
    /// `w_k` for `k = 0..=N`.
    pub noises: Vec<DVector<f64>>,
}

impl Scenario {
    /// Scenario of run `run` under `seed`.
    pub fn draw(model: &SystemModel, seed: u64, run: u64) -> Self {
        let mut rng = SimRng::for_stream(seed, run);
        let x0 = sample_initial_state(model, &mut rng);
        let mut delays = Vec::with_capacity(model.horizon() + 1);
        let mut noises = Vec::with_capacity(model.horizon() + 1);
        for k in 0..=model.horizon() {
            delays.push(sample_delay(model, k, &mut rng));
            noises.push(sample_noise(model, &mut rng));
        }
        Scenario { x0, delays, noises }
    }

    fn check(&self, model: &SystemModel) -> Result<()> {
        let steps = model.horizon() + 1;
        if self.delays.len() != steps || self.noises.len() != steps {
            return Err(VoiError::InvalidConfig(format!(
                "scenario covers {} delays and {} noises, horizon needs {steps}",
                self.delays.len(),
                self.noises.len()
            )));
        }
        if self.x0.len() != model.state_dim() {
            return Err(VoiError::dim("scenario x0", model.state_dim(), self.x0.len()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub tau: usize,
    pub zeta: usize,
    pub eta: Age,
    pub informative: bool,
    pub delta: bool,
    pub x_check: DVector<f64>,
    pub x_hat: DVector<f64>,
    /// `x_k - x_hat_k`.
    pub e: DVector<f64>,
    /// `x_check_k - x_hat_k`.
    pub e_tilde: DVector<f64>,
    /// Error and mismatch propagated by their recursions from `k = 0`.
    pub e_recursive: DVector<f64>,
    pub e_tilde_recursive: DVector<f64>,
    pub voi: f64,
    pub clamped: bool,
    /// Send time of the newest observation folded into `x_hat_k`.
    pub controller_info_sent: Option<usize>,
    /// `theta delta_k`.
    pub comm_cost: f64,
    /// `||e_k||^2_{Gamma_k}`.
    pub error_cost: f64,
    /// `||x_{k+1}||^2_Q + ||u_k||^2_R`.
    pub regulation_cost: f64,
}

impl StepRecord {
    /// `u_k` used only information sent strictly before `k`.
    pub fn is_causal(&self) -> bool {
        self.controller_info_sent.is_none_or(|s| s < self.k)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub policy: String,
    pub steps: Vec<StepRecord>,
    /// `x_{N+1}`.
    pub final_state: DVector<f64>,
}

impl TrajectoryRecord {
    pub fn transmissions(&self) -> usize {
        self.steps.iter().filter(|s| s.delta).count()
    }
}

fn quad_form(m: &nalgebra::DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// Runs one closed-loop trajectory, handing each step to `sink` as it is
/// produced.
pub fn simulate_with(
    model: &SystemModel,
    schedule: &LqrSchedule,
    policy: &TriggerPolicy,
    scenario: &Scenario,
    mut sink: impl FnMut(StepRecord),
) -> Result<DVector<f64>> {
    scenario.check(model)?;
    if schedule.horizon() != model.horizon() {
        return Err(VoiError::InvalidConfig(
            "LQR schedule horizon does not match the model".into(),
        ));
    }
    let horizon = model.horizon();
    let theta = model.theta();

    let mut states = vec![scenario.x0.clone()];
    let mut inputs: Vec<DVector<f64>> = Vec::with_capacity(horizon + 1);
    let mut x_hat = model.m0().clone();
    let mut errors = ErrorState::initial(&scenario.x0, model.m0());
    let mut zeta = 0usize;
    let mut eta = Age::Infinite;
    let mut prev: Option<(bool, usize)> = None;
    let mut controller_info_sent = None;

    for k in 0..=horizon {
        let tau = scenario.delays[k];
        let mut informative = true;
        if let Some((delta_prev, zeta_prev)) = prev {
            eta = update_eta(eta, zeta_prev, delta_prev);
            let eff_tau = tau.min(k);
            let (z, inf) = update_zeta(zeta_prev, eff_tau);
            zeta = z;
            informative = inf;
        }

        let x_k = &states[k];
        let freshest = sample_output(&states, k, zeta)?;
        let x_check = trigger_mmse(model, freshest, zeta, &inputs)?;
        let e_tilde = &x_check - &x_hat;
        let decision = policy.decide(&Snapshot {
            k,
            zeta,
            eta,
            e_tilde: &e_tilde,
        })?;
        let delta = decision.transmit;

        let u = control_input(schedule, &x_hat, k)?;
        let w = &scenario.noises[k];
        let x_next = step_dynamics(model, x_k, &u, w)?;
        inputs.push(u.clone());

        let e = x_k - &x_hat;
        let gamma = schedule.gamma(k);
        let record = StepRecord {
            k,
            x: x_k.clone(),
            u: u.clone(),
            w: w.clone(),
            tau,
            zeta,
            eta,
            informative,
            delta,
            error_cost: quad_form(gamma, &e),
            regulation_cost: quad_form(model.q(), &x_next) + quad_form(model.r(), &u),
            comm_cost: if delta { theta } else { 0.0 },
            x_check,
            x_hat: x_hat.clone(),
            e,
            e_tilde,
            e_recursive: errors.e.clone(),
            e_tilde_recursive: errors.e_tilde.clone(),
            voi: decision.voi,
            clamped: decision.clamped,
            controller_info_sent,
        };

        let received = if delta {
            controller_info_sent = Some(k);
            Some((sample_output(&states, k, zeta)?.clone(), zeta))
        } else {
            None
        };
        x_hat = controller_update(model, &x_hat, received.as_ref().map(|(x, z)| (x, *z)), &inputs)?;

        if k < horizon {
            let next_zeta = update_zeta(zeta, scenario.delays[k + 1].min(k + 1)).0;
            errors = error_recursion(model, &errors, delta, zeta, next_zeta, &scenario.noises[..=k])?;
        }
        states.push(x_next);
        prev = Some((delta, zeta));
        sink(record);
    }
    Ok(states.pop().expect("at least x_0"))
}

/// Runs one trajectory and keeps every step.
pub fn run_scenario(
    model: &SystemModel,
    schedule: &LqrSchedule,
    policy: &TriggerPolicy,
    scenario: &Scenario,
) -> Result<TrajectoryRecord> {
    let mut steps = Vec::with_capacity(model.horizon() + 1);
    let final_state = simulate_with(model, schedule, policy, scenario, |s| steps.push(s))?;
    Ok(TrajectoryRecord {
        policy: policy.label(),
        steps,
        final_state,
    })
}

/// Draws run `run` of `seed` and simulates it.
pub fn run_trajectory(
    model: &SystemModel,
    schedule: &LqrSchedule,
    policy: &TriggerPolicy,
    seed: u64,
    run: u64,
) -> Result<TrajectoryRecord> {
    run_scenario(model, schedule, policy, &Scenario::draw(model, seed, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqr::solve_riccati;
    use crate::model::{DelayModel, ModelSpec};

    fn benchmark() -> (SystemModel, LqrSchedule) {
        let model = ModelSpec::scalar_benchmark().validate().unwrap();
        let sched = solve_riccati(&model).unwrap();
        (model, sched)
    }

    fn close(a: &DVector<f64>, b: &DVector<f64>) -> bool {
        (a - b).amax() <= 1e-9 * b.amax().max(1.0)
    }

    #[test]
    fn always_on_without_delay_keeps_eta_at_one() {
        let mut spec = ModelSpec::scalar_benchmark();
        spec.delay = DelayModel::None;
        spec.N = 30;
        let model = spec.validate().unwrap();
        let sched = solve_riccati(&model).unwrap();
        let rec = run_trajectory(&model, &sched, &TriggerPolicy::AlwaysOn, 3, 0).unwrap();
        assert_eq!(rec.steps[0].eta, Age::Infinite);
        for s in &rec.steps[1..] {
            assert_eq!(s.eta, Age::Finite(1));
            assert_eq!(s.zeta, 0);
        }
        assert_eq!(rec.transmissions(), 31);
    }

    #[test]
    fn never_policy_runs_open_loop() {
        let (model, sched) = benchmark();
        let rec = run_trajectory(&model, &sched, &TriggerPolicy::Never, 1, 0).unwrap();
        let a = model.a()[(0, 0)];
        for w in rec.steps.windows(2) {
            let pred = a * w[0].x_hat[0] + w[0].u[0];
            assert!((w[1].x_hat[0] - pred).abs() < 1e-9 * pred.abs().max(1.0));
            assert!(w[1].eta.is_infinite());
        }
    }

    #[test]
    fn recursions_match_definitions_and_controller_is_causal() {
        let (model, sched) = benchmark();
        for policy in [
            TriggerPolicy::Periodic(7),
            TriggerPolicy::AoiThreshold(4),
            TriggerPolicy::AlwaysOn,
        ] {
            let rec = run_trajectory(&model, &sched, &policy, 11, 2).unwrap();
            for s in &rec.steps {
                assert!(close(&s.e_recursive, &s.e), "k = {}", s.k);
                assert!(close(&s.e_tilde_recursive, &s.e_tilde), "k = {}", s.k);
                assert!(s.is_causal());
                assert!(Age::Finite(s.zeta) <= s.eta);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let (model, sched) = benchmark();
        let a = run_trajectory(&model, &sched, &TriggerPolicy::Periodic(3), 5, 9).unwrap();
        let b = run_trajectory(&model, &sched, &TriggerPolicy::Periodic(3), 5, 9).unwrap();
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.x, y.x);
            assert_eq!(x.u, y.u);
        }
        let c = run_trajectory(&model, &sched, &TriggerPolicy::Periodic(3), 5, 10).unwrap();
        assert_ne!(a.steps[5].x, c.steps[5].x);
    }
}
