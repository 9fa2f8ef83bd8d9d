//! Backward Riccati sweep, LQR gains and the weighting matrices `Gamma_k` of
//! the equivalent loss.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, VoiError};
use crate::model::SystemModel;

const ASYMMETRY_WARN: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct LqrSchedule {
    /// `S_k` for `k = 0..=N+1`, with `S_{N+1} = Q`.
    s: Vec<DMatrix<f64>>,
    /// `L_k` for `k = 0..=N`.
    gains: Vec<DMatrix<f64>>,
    /// `Gamma_k` for `k = 0..=N+1`, with `Gamma_{N+1} = 0`.
    gamma: Vec<DMatrix<f64>>,
    /// Largest asymmetry removed by symmetrization during the sweep.
    pub max_asymmetry: f64,
}

impl LqrSchedule {
    pub fn horizon(&self) -> usize {
        self.gains.len() - 1
    }
    pub fn s(&self, k: usize) -> &DMatrix<f64> {
        &self.s[k]
    }
    pub fn gain(&self, k: usize) -> &DMatrix<f64> {
        &self.gains[k]
    }
    pub fn gamma(&self, k: usize) -> &DMatrix<f64> {
        &self.gamma[k]
    }
}

/// Solves `S_k = Q + A'S A - A'S B (B'S B + R)^{-1} B'S A` backward from
/// `S_{N+1} = Q`, with `L_k = (B'S_{k+1}B + R)^{-1} B'S_{k+1}A` and
/// `Gamma_k = A'S_{k+1}B L_k`.
pub fn solve_riccati(model: &SystemModel) -> Result<LqrSchedule> {
    let (a, b, q, r) = (model.a(), model.b(), model.q(), model.r());
    let horizon = model.horizon();
    let n = a.nrows();

    let mut s = vec![DMatrix::zeros(n, n); horizon + 2];
    let mut gains = vec![DMatrix::zeros(b.ncols(), n); horizon + 1];
    let mut gamma = vec![DMatrix::zeros(n, n); horizon + 2];
    s[horizon + 1] = q.clone();
    let mut max_asymmetry: f64 = 0.0;

    for k in (0..=horizon).rev() {
        let s_next = &s[k + 1];
        let bts = b.transpose() * s_next;
        let g = &bts * b + r;
        let chol = g
            .cholesky()
            .ok_or_else(|| VoiError::Numerical(format!("B'S B + R not positive definite at k = {k}")))?;
        let l = chol.solve(&(&bts * a));
        let gam = a.transpose() * bts.transpose() * &l;
        let s_k = q + a.transpose() * s_next * a - &gam;

        let asym = (&s_k - s_k.transpose()).amax();
        max_asymmetry = max_asymmetry.max(asym);
        s[k] = (&s_k + s_k.transpose()) * 0.5;
        gamma[k] = (&gam + gam.transpose()) * 0.5;
        gains[k] = l;
    }
    if max_asymmetry > ASYMMETRY_WARN {
        log::warn!("Riccati sweep asymmetry reached {max_asymmetry:e}");
    }
    Ok(LqrSchedule {
        s,
        gains,
        gamma,
        max_asymmetry,
    })
}

/// Certainty-equivalent input `u_k = -L_k x_hat_k`.
pub fn control_input(schedule: &LqrSchedule, x_hat: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    if k > schedule.horizon() {
        return Err(VoiError::InvalidConfig(format!(
            "control requested at k = {k} beyond horizon {}",
            schedule.horizon()
        )));
    }
    let l = &schedule.gains[k];
    if x_hat.len() != l.ncols() {
        return Err(VoiError::dim("control_input", l.ncols(), x_hat.len()));
    }
    Ok(-(l * x_hat))
}
