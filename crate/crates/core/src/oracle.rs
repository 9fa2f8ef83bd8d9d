//! Brute-force optima for tiny instances, used to cross-check both dynamic
//! programs.
//!
//! The mismatch oracle enumerates every deterministic decision tree over
//! two-point noise histories and scores each by exact expectation over all
//! noise paths, simulating the scalar loop directly. The age oracle
//! enumerates every map from reachable `(k, zeta, eta)` to a decision and
//! scores it exactly by enumerating delay paths and tracking the error as a
//! linear combination of the initial error and the noises.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::aoi::{update_eta, update_zeta, Age};
use crate::error::{Result, VoiError};
use crate::lqr::{solve_riccati, LqrSchedule};
use crate::model::{DelayModel, ModelSpec, NoiseKind, SystemModel};
use crate::solver::{solve_path_dp, solve_restricted_dp, PathSolverConfig};

pub const MAX_PATH_HORIZON: usize = 3;
pub const MAX_RESTRICTED_HORIZON: usize = 5;
const MAX_TREE_BITS: usize = 20;
const MAX_MAP_BITS: usize = 22;
const MAX_DYADIC_EXPONENT: i32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub kind: &'static str,
    pub horizon: usize,
    /// Expected loss predicted by the dynamic program.
    pub dp_value: f64,
    /// Best expected loss found by enumeration.
    pub enumerated_value: f64,
    pub abs_diff: f64,
    /// Number of candidate policies scored.
    pub candidates: u64,
    /// Decision bits per candidate.
    pub bits: usize,
    /// The dynamic program's own policy, scored by the enumerator.
    pub dp_policy_value: f64,
    /// Baselines scored by the enumerator.
    pub never_value: f64,
    pub always_value: f64,
}

impl OracleReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.abs_diff <= tol * self.enumerated_value.abs().max(1.0)
    }
}

fn scalar(m: &SystemModel, what: &str) -> Result<()> {
    if m.state_dim() != 1 || m.input_dim() != 1 {
        return Err(VoiError::Unsupported(format!("{what} oracle needs a scalar model")));
    }
    Ok(())
}

/// Decision tree node for time `k` and history bits `h` (initial-sign bit
/// first when the initial state is random, then noise signs).
fn tree_offsets(horizon: usize, init_bits: usize) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(horizon + 2);
    let mut acc = 0;
    for k in 0..=horizon {
        offsets.push(acc);
        acc += 1 << (init_bits + k);
    }
    offsets.push(acc);
    offsets
}

struct ScalarLoop {
    a: f64,
    b: f64,
    sw: f64,
    m0: f64,
    s0: f64,
    theta: f64,
    gamma: Vec<f64>,
    gain: Vec<f64>,
    horizon: usize,
    init_bits: usize,
}

impl ScalarLoop {
    fn new(model: &SystemModel, sched: &LqrSchedule) -> Self {
        let s0 = model.initial_cov()[(0, 0)].sqrt();
        ScalarLoop {
            a: model.a()[(0, 0)],
            b: model.b()[(0, 0)],
            sw: model.w()[(0, 0)].sqrt(),
            m0: model.m0()[0],
            s0,
            theta: model.theta(),
            gamma: (0..=model.horizon()).map(|k| sched.gamma(k)[(0, 0)]).collect(),
            gain: (0..=model.horizon()).map(|k| sched.gain(k)[(0, 0)]).collect(),
            horizon: model.horizon(),
            init_bits: usize::from(s0 > 0.0),
        }
    }

    fn sign(bits: usize, i: usize) -> f64 {
        if bits >> i & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Expected loss of a decision rule `decide(k, history)` by enumeration
    /// over all equiprobable sign paths. The history at `k` holds the first
    /// `init_bits + k` bits.
    fn expected_loss(&self, mut decide: impl FnMut(usize, usize, f64) -> bool) -> f64 {
        let path_bits = self.init_bits + self.horizon;
        let paths = 1usize << path_bits;
        let mut total = 0.0;
        for path in 0..paths {
            let mut x = self.m0
                + if self.init_bits == 1 {
                    self.s0 * Self::sign(path, 0)
                } else {
                    0.0
                };
            let mut x_hat = self.m0;
            let mut loss = 0.0;
            for k in 0..=self.horizon {
                let hist = path & ((1 << (self.init_bits + k)) - 1);
                let delta = decide(k, hist, x - x_hat);
                let e = x - x_hat;
                loss += self.theta * f64::from(u8::from(delta)) + self.gamma[k] * e * e;
                if k == self.horizon {
                    break;
                }
                let u = -self.gain[k] * x_hat;
                let w = self.sw * Self::sign(path, self.init_bits + k);
                let drift = self.a * x + self.b * u;
                x_hat = if delta { drift } else { self.a * x_hat + self.b * u };
                x = drift + w;
            }
            total += loss;
        }
        total / paths as f64
    }

    fn reachable_mismatches(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let paths = 1usize << (self.init_bits + self.horizon);
        for path in 0..paths {
            // all send patterns: mismatch is a e + w or w
            let e0 = if self.init_bits == 1 {
                self.s0 * Self::sign(path, 0)
            } else {
                0.0
            };
            let mut frontier = vec![e0];
            out.push(e0);
            for k in 0..self.horizon {
                let w = self.sw * Self::sign(path, self.init_bits + k);
                frontier = frontier.iter().flat_map(|&e| [self.a * e + w, w]).collect();
                out.extend(&frontier);
            }
        }
        out
    }
}

/// Smallest dyadic step `2^-j` on which every value lies exactly.
fn dyadic_step(values: &[f64]) -> Option<f64> {
    (0..=MAX_DYADIC_EXPONENT).map(|j| 2f64.powi(-j)).find(|&h| {
        values.iter().all(|&v| {
            let q = v / h;
            (q - q.round()).abs() < 1e-12 * q.abs().max(1.0)
        })
    })
}

/// Mismatch DP versus exhaustive decision trees. Requires a scalar model in
/// test mode with two-point noise, no processing delay and `N <= 3`.
pub fn path_oracle(model: &SystemModel) -> Result<OracleReport> {
    scalar(model, "mismatch")?;
    if model.noise_kind() != NoiseKind::TwoPoint || !model.test_mode() {
        return Err(VoiError::InvalidConfig(
            "mismatch oracle needs test_mode with two-point noise".into(),
        ));
    }
    if model.delay().max_delay() != 0 {
        return Err(VoiError::InvalidConfig("mismatch oracle needs delay kind none".into()));
    }
    if model.horizon() > MAX_PATH_HORIZON {
        return Err(VoiError::TooLarge(format!(
            "mismatch oracle supports N <= {MAX_PATH_HORIZON}, got N = {}",
            model.horizon()
        )));
    }
    let sched = solve_riccati(model)?;
    let sys = ScalarLoop::new(model, &sched);
    let offsets = tree_offsets(sys.horizon, sys.init_bits);
    let bits = offsets[sys.horizon + 1];
    if bits > MAX_TREE_BITS {
        return Err(VoiError::TooLarge(format!(
            "{bits} decision-tree bits exceed the limit of {MAX_TREE_BITS}; use M0 = 0 or a shorter horizon"
        )));
    }

    let reachable = sys.reachable_mismatches();
    let step = dyadic_step(&reachable)
        .ok_or_else(|| VoiError::InvalidConfig("reachable mismatches do not lie on a dyadic grid".into()))?;
    let e_max = reachable.iter().fold(step, |m, v| m.max(v.abs())) + step;
    let cfg = PathSolverConfig {
        e_max: Some(e_max),
        points_per_side: (e_max / step).round() as usize,
        quadrature_order: 2,
    };
    let table = solve_path_dp(model, &sched, &cfg)?;
    let dp_value = sys.gamma[0] * model.initial_cov()[(0, 0)] + table.initial_value();

    let mut best = f64::INFINITY;
    let candidates = 1u64 << bits;
    for tree in 0..candidates {
        let v = sys.expected_loss(|k, hist, _| tree >> (offsets[k] + hist) & 1 == 1);
        best = best.min(v);
    }
    let dp_policy_value = sys.expected_loss(|k, _, e| table.voi_at(k, 0, e).map(|(v, _)| v >= 0.0).unwrap_or(false));
    let never_value = sys.expected_loss(|_, _, _| false);
    let always_value = sys.expected_loss(|_, _, _| true);
    Ok(OracleReport {
        kind: "mismatch",
        horizon: sys.horizon,
        dp_value,
        enumerated_value: best,
        abs_diff: (dp_value - best).abs(),
        candidates,
        bits,
        dp_policy_value,
        never_value,
        always_value,
    })
}

type AgeState = (usize, usize, Age);

fn delay_paths(delay: &DelayModel, horizon: usize) -> Vec<(Vec<usize>, f64)> {
    let mut paths = vec![(vec![0usize], 1.0)];
    for k in 1..=horizon {
        let pmf = delay.pmf_at(k);
        paths = paths
            .into_iter()
            .flat_map(|(p, w)| {
                pmf.iter().map(move |&(tau, q)| {
                    let mut next = p.clone();
                    next.push(tau.min(k));
                    (next, w * q)
                })
            })
            .collect();
    }
    paths
}

/// Age states reachable under some decision sequence.
fn reachable_age_states(paths: &[(Vec<usize>, f64)], horizon: usize) -> Vec<AgeState> {
    let mut set = BTreeSet::new();
    for (taus, _) in paths {
        let mut frontier = vec![(0usize, Age::Infinite)];
        for k in 0..=horizon {
            let mut next = BTreeSet::new();
            for &(zeta, eta) in &frontier {
                set.insert((k, zeta, eta));
                if k < horizon {
                    for delta in [false, true] {
                        let eta_n = update_eta(eta, zeta, delta);
                        let zeta_n = update_zeta(zeta, taus[k + 1]).0;
                        next.insert((zeta_n, eta_n));
                    }
                }
            }
            frontier = next.into_iter().collect();
        }
    }
    set.into_iter().collect()
}

/// Age DP versus exhaustive age-to-decision maps. Requires a scalar model
/// with `N <= 5`.
pub fn restricted_oracle(model: &SystemModel) -> Result<OracleReport> {
    scalar(model, "age")?;
    if model.horizon() > MAX_RESTRICTED_HORIZON {
        return Err(VoiError::TooLarge(format!(
            "age oracle supports N <= {MAX_RESTRICTED_HORIZON}, got N = {}",
            model.horizon()
        )));
    }
    let horizon = model.horizon();
    let sched = solve_riccati(model)?;
    let paths = delay_paths(model.delay(), horizon);
    let states = reachable_age_states(&paths, horizon);
    let bits = states.len();
    if bits > MAX_MAP_BITS {
        return Err(VoiError::TooLarge(format!(
            "{bits} reachable age states exceed the limit of {MAX_MAP_BITS}"
        )));
    }

    let a = model.a()[(0, 0)];
    let w = model.w()[(0, 0)];
    let m0 = model.initial_cov()[(0, 0)];
    let theta = model.theta();
    let gamma: Vec<f64> = (0..=horizon).map(|k| sched.gamma(k)[(0, 0)]).collect();

    let score = |decide: &dyn Fn(AgeState) -> bool| -> f64 {
        let mut total = 0.0;
        for (taus, prob) in &paths {
            // coeffs[0] multiplies e_0, coeffs[j + 1] multiplies w_j
            let mut coeffs = vec![0.0; horizon + 2];
            coeffs[0] = 1.0;
            let (mut zeta, mut eta) = (0usize, Age::Infinite);
            let mut loss = 0.0;
            for k in 0..=horizon {
                let delta = decide((k, zeta, eta));
                let var = coeffs[0] * coeffs[0] * m0 + coeffs[1..].iter().map(|c| c * c * w).sum::<f64>();
                loss += theta * f64::from(u8::from(delta)) + gamma[k] * var;
                if k == horizon {
                    break;
                }
                if delta {
                    // e_{k+1} = sum_{t=0}^{zeta} A^t w_{k-t}
                    coeffs.iter_mut().for_each(|c| *c = 0.0);
                    for t in 0..=zeta {
                        coeffs[k - t + 1] = a.powi(t as i32);
                    }
                } else {
                    coeffs.iter_mut().for_each(|c| *c *= a);
                    coeffs[k + 1] += 1.0;
                }
                eta = update_eta(eta, zeta, delta);
                zeta = update_zeta(zeta, taus[k + 1]).0;
            }
            total += prob * loss;
        }
        total
    };

    let index = |s: AgeState| states.binary_search(&s).expect("reachable state");
    let mut best = f64::INFINITY;
    let candidates = 1u64 << bits;
    for map in 0..candidates {
        let v = score(&|s| map >> index(s) & 1 == 1);
        best = best.min(v);
    }
    let table = solve_restricted_dp(model, &sched)?;
    let dp_value = gamma[0] * m0 + table.initial_value();
    let dp_policy_value = score(&|(k, zeta, eta)| table.transmit(k, zeta, eta).unwrap_or(false));
    let never_value = score(&|_| false);
    let always_value = score(&|_| true);
    Ok(OracleReport {
        kind: "age",
        horizon,
        dp_value,
        enumerated_value: best,
        abs_diff: (dp_value - best).abs(),
        candidates,
        bits,
        dp_policy_value,
        never_value,
        always_value,
    })
}

fn oracle_spec(a: f64, m0_var: f64, horizon: usize, theta: f64, delay: DelayModel) -> ModelSpec {
    let mut spec = ModelSpec::scalar(a, 1.0, 1.0, 1.0, 0.1, 0.0, m0_var, horizon, theta, delay);
    spec.test_mode = true;
    spec.noise = NoiseKind::TwoPoint;
    spec
}

/// Built-in instances for the mismatch oracle.
pub fn default_path_instances() -> Vec<ModelSpec> {
    vec![
        oracle_spec(2.0, 1.0, 2, 2.0, DelayModel::None),
        oracle_spec(1.5, 0.0, 3, 1.0, DelayModel::None),
    ]
}

/// Built-in instances for the age oracle.
pub fn default_restricted_instances() -> Vec<ModelSpec> {
    let mut bern = ModelSpec::scalar(
        1.1,
        1.0,
        1.0,
        1.0,
        0.1,
        0.0,
        1.0,
        3,
        1.5,
        DelayModel::BernoulliFixed {
            d: 1,
            p: crate::model::StepProbability::Constant(0.5),
        },
    );
    bern.test_mode = false;
    let none = ModelSpec::scalar(1.1, 1.0, 1.0, 1.0, 0.1, 0.0, 1.0, 5, 1.5, DelayModel::None);
    vec![bern, none]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_steps() {
        assert_eq!(dyadic_step(&[1.0, -3.0, 0.5]), Some(0.5));
        assert_eq!(dyadic_step(&[0.375]), Some(0.125));
        assert_eq!(dyadic_step(&[0.1]), None);
    }

    #[test]
    fn mismatch_oracle_agrees() {
        for spec in default_path_instances() {
            let r = path_oracle(&spec.validate().unwrap()).unwrap();
            assert!(r.passes(1e-9), "{r:?}");
            assert!((r.dp_policy_value - r.enumerated_value).abs() < 1e-9, "{r:?}");
            // the optimum is neither trivial policy
            assert!(r.enumerated_value < r.never_value.min(r.always_value) - 1e-6, "{r:?}");
        }
    }

    #[test]
    fn age_oracle_agrees() {
        for spec in default_restricted_instances() {
            let r = restricted_oracle(&spec.validate().unwrap()).unwrap();
            assert!(r.passes(1e-9), "{r:?}");
            assert!((r.dp_policy_value - r.enumerated_value).abs() < 1e-9, "{r:?}");
            // the optimum is neither trivial policy
            assert!(r.enumerated_value < r.never_value.min(r.always_value) - 1e-6, "{r:?}");
        }
    }

    #[test]
    fn guards() {
        let mut spec = default_restricted_instances().remove(1);
        spec.N = 6;
        assert!(matches!(
            restricted_oracle(&spec.validate().unwrap()),
            Err(VoiError::TooLarge(_))
        ));
        let mut spec = default_path_instances().remove(1);
        spec.N = 4;
        assert!(matches!(
            path_oracle(&spec.validate().unwrap()),
            Err(VoiError::TooLarge(_))
        ));
        let mut spec = default_path_instances().remove(0);
        spec.noise = NoiseKind::Gaussian;
        assert!(path_oracle(&spec.validate().unwrap()).is_err());
    }
}
