//! Monte Carlo evaluation of the rate-regulation losses and the no-news bias
//! check.

use rayon::prelude::*;
use serde::Serialize;

use super::{simulate_with, Scenario};
use crate::error::{Result, VoiError};
use crate::lqr::LqrSchedule;
use crate::model::SystemModel;
use crate::solver::TriggerPolicy;

const Z95: f64 = 1.959963984540054;

/// Sample mean with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Estimate {
                mean: f64::NAN,
                ci95: f64::NAN,
                std_err: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_err = (var / n).sqrt();
        Estimate {
            mean,
            ci95: Z95 * std_err,
            std_err,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }
}

/// Per-run totals over `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub transmissions: usize,
    /// `sum ||e_k||^2_{Gamma_k}`
    pub error_cost: f64,
    /// `sum ||x_{k+1}||^2_Q + ||u_k||^2_R`
    pub regulation_cost: f64,
    pub clamped_steps: usize,
}

impl RunSummary {
    /// `sum theta delta_k + ||e_k||^2_{Gamma_k}`.
    pub fn psi(&self, theta: f64) -> f64 {
        theta * self.transmissions as f64 + self.error_cost
    }

    /// Rate-regulation loss with weight `lambda` and transmission price `ell`.
    pub fn phi(&self, lambda: f64, ell: f64, horizon: usize) -> f64 {
        let steps = (horizon + 1) as f64;
        ((1.0 - lambda) * ell * self.transmissions as f64 + lambda * self.regulation_cost) / steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub policy: String,
    pub n_runs: usize,
    pub seed: u64,
    pub theta: f64,
    pub lambda: Option<f64>,
    /// Absent when the model only fixes `theta`.
    pub phi: Option<Estimate>,
    pub psi: Estimate,
    /// Mean of `delta_k`.
    pub rate: Estimate,
    /// Mean per-step quadratic cost.
    pub regulation: Estimate,
    pub clamped_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: LossReport,
    pub runs: Vec<RunSummary>,
}

impl Evaluation {
    pub fn psi_samples(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.psi(self.report.theta)).collect()
    }

    /// Per-run `phi`; empty without `lambda`.
    pub fn phi_samples(&self, model: &SystemModel) -> Vec<f64> {
        match (model.lambda(), model.ell()) {
            (Some(l), Some(ell)) => self.runs.iter().map(|r| r.phi(l, ell, model.horizon())).collect(),
            _ => Vec::new(),
        }
    }
}

/// Paired difference `a - b` over common runs.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Estimate {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Estimate::from_samples(&d)
}

fn summarize(
    model: &SystemModel,
    schedule: &LqrSchedule,
    policy: &TriggerPolicy,
    scenario: &Scenario,
) -> Result<RunSummary> {
    let mut s = RunSummary {
        transmissions: 0,
        error_cost: 0.0,
        regulation_cost: 0.0,
        clamped_steps: 0,
    };
    simulate_with(model, schedule, policy, scenario, |step| {
        s.transmissions += step.delta as usize;
        s.error_cost += step.error_cost;
        s.regulation_cost += step.regulation_cost;
        s.clamped_steps += step.clamped as usize;
    })?;
    Ok(s)
}

/// Monte Carlo over runs `0..n_runs` of `seed`. Runs are simulated in
/// parallel and reduced in run order, so reports are reproducible bit for bit.
pub fn evaluate(
    model: &SystemModel,
    schedule: &LqrSchedule,
    policy: &TriggerPolicy,
    n_runs: usize,
    seed: u64,
) -> Result<Evaluation> {
    if n_runs == 0 {
        return Err(VoiError::InvalidConfig("need at least one run".into()));
    }
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| summarize(model, schedule, policy, &Scenario::draw(model, seed, r)))
        .collect::<Result<Vec<_>>>()?;

    let theta = model.theta();
    let steps = (model.horizon() + 1) as f64;
    let psi: Vec<f64> = runs.iter().map(|r| r.psi(theta)).collect();
    let rate: Vec<f64> = runs.iter().map(|r| r.transmissions as f64 / steps).collect();
    let regulation: Vec<f64> = runs.iter().map(|r| r.regulation_cost / steps).collect();
    let (phi, note) = match (model.lambda(), model.ell()) {
        (Some(l), Some(ell)) => {
            let phi: Vec<f64> = runs.iter().map(|r| r.phi(l, ell, model.horizon())).collect();
            (Some(Estimate::from_samples(&phi)), None)
        }
        _ => (
            None,
            Some("model gives theta only; phi omitted, compare policies through psi".to_string()),
        ),
    };
    let clamped_steps = runs.iter().map(|r| r.clamped_steps).sum();
    Ok(Evaluation {
        report: LossReport {
            policy: policy.label(),
            n_runs,
            seed,
            theta,
            lambda: model.lambda(),
            phi,
            psi: Estimate::from_samples(&psi),
            rate: Estimate::from_samples(&rate),
            regulation: Estimate::from_samples(&regulation),
            clamped_steps,
            note,
        },
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalingBucket {
    /// Time window `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub component: usize,
    /// Number of `(run, k)` samples with `delta_k = 0`.
    pub samples: usize,
    pub mean: f64,
    /// Standard error of the mean of per-run sums.
    pub std_err: f64,
    pub z: f64,
    pub skipped: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalingReport {
    pub policy: String,
    pub n_runs: usize,
    pub seed: u64,
    pub bucket_width: usize,
    pub min_samples: usize,
    pub buckets: Vec<SignalingBucket>,
    pub passed: bool,
    pub max_abs_z: f64,
}

/// Tests whether the mismatch has zero mean at steps without a transmission.
///
/// For each window of `bucket_width` steps and each component, the per-run
/// sum of `e_tilde_k 1{delta_k = 0}` has zero mean when the no-news event
/// carries no sign information. The bucket passes when the mean of those sums
/// is within 3 standard errors of zero. Buckets with fewer than `min_samples`
/// idle samples are skipped and flagged.
pub fn signaling_residual_check(
    model: &SystemModel,
    schedule: &LqrSchedule,
    policy: &TriggerPolicy,
    n_runs: usize,
    seed: u64,
    bucket_width: usize,
    min_samples: usize,
) -> Result<SignalingReport> {
    if n_runs < 2 || bucket_width == 0 {
        return Err(VoiError::InvalidConfig(
            "signaling check needs at least two runs and a positive bucket width".into(),
        ));
    }
    let n = model.state_dim();
    let n_buckets = model.horizon() / bucket_width + 1;
    let per_run = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut sums = vec![0.0; n_buckets * n];
            let mut counts = vec![0usize; n_buckets];
            simulate_with(model, schedule, policy, &Scenario::draw(model, seed, r), |s| {
                if !s.delta {
                    let b = s.k / bucket_width;
                    counts[b] += 1;
                    for j in 0..n {
                        sums[b * n + j] += s.e_tilde[j];
                    }
                }
            })?;
            Ok((sums, counts))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut buckets = Vec::with_capacity(n_buckets * n);
    for b in 0..n_buckets {
        let samples: usize = per_run.iter().map(|(_, c)| c[b]).sum();
        for j in 0..n {
            let sums: Vec<f64> = per_run.iter().map(|(s, _)| s[b * n + j]).collect();
            let est = Estimate::from_samples(&sums);
            let skipped = samples < min_samples;
            let z = if est.std_err > 0.0 {
                est.mean / est.std_err
            } else if est.mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            buckets.push(SignalingBucket {
                start: b * bucket_width,
                end: ((b + 1) * bucket_width).min(model.horizon() + 1),
                component: j,
                samples,
                mean: if samples > 0 {
                    sums.iter().sum::<f64>() / samples as f64
                } else {
                    0.0
                },
                std_err: est.std_err,
                z,
                skipped,
                passed: skipped || z.abs() <= 3.0,
            });
        }
    }
    let tested: Vec<&SignalingBucket> = buckets.iter().filter(|b| !b.skipped).collect();
    let max_abs_z = tested.iter().map(|b| b.z.abs()).fold(0.0, f64::max);
    Ok(SignalingReport {
        policy: policy.label(),
        n_runs,
        seed,
        bucket_width,
        min_samples,
        passed: !tested.is_empty() && tested.iter().all(|b| b.passed),
        max_abs_z,
        buckets,
    })
}
