//! Dynamic program over the age pair `(zeta, eta)`, for a trigger that only
//! sees timestamps.
//!
//! `V_k(zeta, eta) = min over delta of`
//! `theta delta + tr(Gamma_{k+1} C_delta) + E[V_{k+1}(zeta', eta')]`, where
//! `C_1 = sum_{t=0}^{zeta} A^t W A^t'` and `C_0` is the idle error covariance
//! (see [`CovarianceCache::idle_error_cov`]). The next trigger age follows the
//! delay pmf at `k + 1`, the next controller age is `zeta + 1` after a
//! transmission and `eta + 1` otherwise.

use serde::{Deserialize, Serialize};

use crate::aoi::{update_zeta, Age};
use crate::error::{Result, VoiError};
use crate::estimator::CovarianceCache;
use crate::lqr::LqrSchedule;
use crate::model::SystemModel;

const MAX_ENTRIES: usize = 200_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedValueTable {
    pub(crate) horizon: usize,
    pub(crate) zeta_cap: usize,
    pub(crate) theta: f64,
    /// `V` for `k = 0..=N+1`.
    pub(crate) value: Vec<f64>,
    /// `VoI` for `k = 0..=N`.
    pub(crate) voi: Vec<f64>,
    /// Continuation difference `E[V_{k+1} | idle] - E[V_{k+1} | send]`.
    pub(crate) rho: Vec<f64>,
}

impl RestrictedValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Largest trigger age represented.
    pub fn zeta_cap(&self) -> usize {
        self.zeta_cap
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Finite controller ages run over `0..=N+1`; slot `N+2` is infinity.
    pub fn eta_slots(&self) -> usize {
        self.horizon + 3
    }

    pub(crate) fn slot(&self, eta: Age) -> usize {
        match eta {
            Age::Finite(e) => e.min(self.horizon + 1),
            Age::Infinite => self.horizon + 2,
        }
    }

    fn index(&self, k: usize, zeta: usize, eta: Age) -> usize {
        (k * (self.zeta_cap + 1) + zeta) * self.eta_slots() + self.slot(eta)
    }

    fn check(&self, k: usize, zeta: usize, eta: Age, last_k: usize) -> Result<()> {
        if k > last_k || zeta > self.zeta_cap {
            return Err(VoiError::InvalidConfig(format!(
                "state (k = {k}, zeta = {zeta}) outside the restricted table"
            )));
        }
        if let Age::Finite(e) = eta {
            if e < zeta {
                return Err(VoiError::InvalidAges { zeta, eta: e });
            }
            if e > self.horizon + 1 {
                return Err(VoiError::InvalidConfig(format!("eta = {e} beyond N + 1")));
            }
        }
        Ok(())
    }

    pub fn value(&self, k: usize, zeta: usize, eta: Age) -> Result<f64> {
        self.check(k, zeta, eta, self.horizon + 1)?;
        Ok(self.value[self.index(k, zeta, eta)])
    }

    pub fn voi(&self, k: usize, zeta: usize, eta: Age) -> Result<f64> {
        self.check(k, zeta, eta, self.horizon)?;
        Ok(self.voi[self.index(k, zeta, eta)])
    }

    pub fn rho(&self, k: usize, zeta: usize, eta: Age) -> Result<f64> {
        self.check(k, zeta, eta, self.horizon)?;
        Ok(self.rho[self.index(k, zeta, eta)])
    }

    /// Optimal decision; ties transmit.
    pub fn transmit(&self, k: usize, zeta: usize, eta: Age) -> Result<bool> {
        Ok(self.voi(k, zeta, eta)? >= 0.0)
    }

    /// Expected optimal cost `V_0(0, inf)`, excluding the policy-independent
    /// `||e_0||^2` term.
    pub fn initial_value(&self) -> f64 {
        self.value[self.index(0, 0, Age::Infinite)]
    }

    /// Smallest finite `eta >= zeta` at which the policy transmits.
    pub fn eta_threshold(&self, k: usize, zeta: usize) -> Option<usize> {
        (zeta..=self.horizon + 1).find(|&e| {
            self.voi
                .get(self.index(k, zeta, Age::Finite(e)))
                .is_some_and(|&v| v >= 0.0)
        })
    }

    /// Recomputes both branch values `(idle, send)` at `(k, zeta, eta)` from
    /// the stored `V_{k+1}`. `V_k` must equal their minimum.
    pub fn branch_values(
        &self,
        model: &SystemModel,
        schedule: &LqrSchedule,
        k: usize,
        zeta: usize,
        eta: Age,
    ) -> Result<(f64, f64)> {
        self.check(k, zeta, eta, self.horizon)?;
        let cache = CovarianceCache::new(model, self.horizon + 1);
        let gamma = schedule.gamma(k + 1);
        let idle_cost = (gamma * cache.idle_error_cov(eta, k)).trace();
        let send_cost = (gamma * cache.sigma(zeta)).trace();
        let (e0, e1) = self.continuation(model, k, zeta, eta);
        Ok((idle_cost + e0, self.theta + send_cost + e1))
    }

    fn continuation(&self, model: &SystemModel, k: usize, zeta: usize, eta: Age) -> (f64, f64) {
        if k == self.horizon {
            return (0.0, 0.0);
        }
        let idle_eta = eta.succ();
        let send_eta = Age::Finite(zeta + 1);
        let mut idle = 0.0;
        let mut send = 0.0;
        for (tau, p) in model.delay().pmf_at(k + 1) {
            let z = update_zeta(zeta, tau).0.min(self.zeta_cap);
            idle += p * self.value[self.index(k + 1, z, idle_eta)];
            send += p * self.value[self.index(k + 1, z, send_eta)];
        }
        (idle, send)
    }
}

/// Backward sweep of the age-only Bellman recursion.
pub fn solve_restricted_dp(model: &SystemModel, schedule: &LqrSchedule) -> Result<RestrictedValueTable> {
    let horizon = model.horizon();
    if schedule.horizon() != horizon {
        return Err(VoiError::InvalidConfig(
            "LQR schedule horizon does not match the model".into(),
        ));
    }
    let zeta_cap = model.delay().max_delay().min(horizon);
    let slots = horizon + 3;
    let entries = (horizon + 2)
        .checked_mul(zeta_cap + 1)
        .and_then(|x| x.checked_mul(slots))
        .filter(|&x| x <= MAX_ENTRIES)
        .ok_or_else(|| {
            VoiError::TooLarge(format!(
                "restricted state space for N = {horizon}, zeta <= {zeta_cap} exceeds {MAX_ENTRIES} entries"
            ))
        })?;

    let mut table = RestrictedValueTable {
        horizon,
        zeta_cap,
        theta: model.theta(),
        value: vec![0.0; entries],
        voi: vec![f64::NAN; entries],
        rho: vec![f64::NAN; entries],
    };
    let cache = CovarianceCache::new(model, horizon + 1);
    let theta = model.theta();

    for k in (0..=horizon).rev() {
        let gamma = schedule.gamma(k + 1);
        let send_trace: Vec<f64> = (0..=zeta_cap).map(|z| (gamma * cache.sigma(z)).trace()).collect();
        for zeta in 0..=zeta_cap {
            for slot in 0..slots {
                let eta = if slot == horizon + 2 {
                    Age::Infinite
                } else {
                    Age::Finite(slot)
                };
                let idx = table.index(k, zeta, eta);
                if matches!(eta, Age::Finite(e) if e < zeta) {
                    table.value[idx] = f64::NAN;
                    continue;
                }
                let gap = match eta {
                    Age::Finite(e) => cache.sigma(e) - cache.sigma(zeta),
                    Age::Infinite => cache.sigma(k) - cache.sigma(zeta) + cache.propagated_prior(k + 1),
                };
                let (e0, e1) = table.continuation(model, k, zeta, eta);
                let rho = e0 - e1;
                let voi = (gamma * gap).trace() - theta + rho;
                let idle = (gamma * cache.idle_error_cov(eta, k)).trace() + e0;
                let send = theta + send_trace[zeta] + e1;
                table.value[idx] = idle.min(send);
                table.voi[idx] = voi;
                table.rho[idx] = rho;
            }
        }
    }
    Ok(table)
}
