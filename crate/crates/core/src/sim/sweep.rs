//! Rate-regulation trade-off curves over a policy family.

use std::sync::Arc;

use serde::Serialize;

use super::evaluate::{evaluate, Estimate};
use crate::error::{Result, VoiError};
use crate::lqr::LqrSchedule;
use crate::model::SystemModel;
use crate::solver::{solve_path_dp, solve_restricted_dp, PathSolverConfig, TriggerPolicy};

#[derive(Debug, Clone, PartialEq)]
pub enum SweepFamily {
    /// Age-only VoI policy re-solved for each communication weight.
    RestrictedTheta(Vec<f64>),
    /// Mismatch VoI policy re-solved for each communication weight.
    PathTheta(Vec<f64>, PathSolverConfig),
    AoiThreshold(Vec<usize>),
    Periodic(Vec<usize>),
}

impl SweepFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SweepFamily::RestrictedTheta(_) => "restricted-theta",
            SweepFamily::PathTheta(..) => "path-theta",
            SweepFamily::AoiThreshold(_) => "aoi-threshold",
            SweepFamily::Periodic(_) => "periodic",
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepFamily::RestrictedTheta(v) | SweepFamily::PathTheta(v, _) => v.len(),
            SweepFamily::AoiThreshold(v) | SweepFamily::Periodic(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub family: String,
    pub parameter: f64,
    pub rate: Estimate,
    pub regulation: Estimate,
    /// Loss under the model's own `theta`.
    pub psi: Estimate,
}

/// Evaluates every member of the family on the same runs.
pub fn sweep(
    model: &SystemModel,
    schedule: &LqrSchedule,
    family: &SweepFamily,
    n_runs: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if family.len() == 0 {
        return Err(VoiError::InvalidConfig("empty sweep grid".into()));
    }
    let members: Vec<(f64, TriggerPolicy)> = match family {
        SweepFamily::RestrictedTheta(thetas) => thetas
            .iter()
            .map(|&t| {
                let m = model.with_theta(t)?;
                Ok((
                    t,
                    TriggerPolicy::RestrictedVoi(Arc::new(solve_restricted_dp(&m, schedule)?)),
                ))
            })
            .collect::<Result<_>>()?,
        SweepFamily::PathTheta(thetas, cfg) => thetas
            .iter()
            .map(|&t| {
                let m = model.with_theta(t)?;
                Ok((t, TriggerPolicy::PathVoi(Arc::new(solve_path_dp(&m, schedule, cfg)?))))
            })
            .collect::<Result<_>>()?,
        SweepFamily::AoiThreshold(hs) => hs.iter().map(|&h| (h as f64, TriggerPolicy::AoiThreshold(h))).collect(),
        SweepFamily::Periodic(ps) => ps
            .iter()
            .map(|&p| {
                if p == 0 {
                    return Err(VoiError::InvalidConfig("period must be positive".into()));
                }
                Ok((p as f64, TriggerPolicy::Periodic(p)))
            })
            .collect::<Result<_>>()?,
    };
    members
        .into_iter()
        .map(|(parameter, policy)| {
            let ev = evaluate(model, schedule, &policy, n_runs, seed)?;
            Ok(SweepPoint {
                family: family.name().to_string(),
                parameter,
                rate: ev.report.rate,
                regulation: ev.report.regulation,
                psi: ev.report.psi,
            })
        })
        .collect()
}
