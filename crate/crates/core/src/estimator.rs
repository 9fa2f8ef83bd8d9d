//! MMSE estimates at the event trigger and the controller, the estimation
//! error and mismatch recursions, and the noise-sum covariances they induce.
//!
//! Input and noise histories are passed as full slices `v_0..v_{k-1}` (or up
//! to `v_k` where stated) and the functions index backwards from the end, so
//! a caller only has to keep appending.

use nalgebra::{DMatrix, DVector};

use crate::aoi::Age;
use crate::error::{Result, VoiError};
use crate::model::SystemModel;

fn trailing<'a>(history: &'a [DVector<f64>], needed: usize, what: &str) -> Result<&'a [DVector<f64>]> {
    if history.len() < needed {
        return Err(VoiError::MissingHistory(format!(
            "{what}: need {needed} trailing entries, have {}",
            history.len()
        )));
    }
    Ok(&history[history.len() - needed..])
}

/// Trigger estimate `A^zeta x_{k-zeta} + sum_{t=1}^{zeta} A^{t-1} B u_{k-t}`.
///
/// `inputs` is the input history `u_0..u_{k-1}`.
pub fn trigger_mmse(
    model: &SystemModel,
    freshest: &DVector<f64>,
    zeta: usize,
    inputs: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let window = trailing(inputs, zeta, "trigger estimate")?;
    let (a, b) = (model.a(), model.b());
    let mut power = DMatrix::identity(a.nrows(), a.ncols());
    let mut acc = DVector::zeros(a.nrows());
    // window[zeta - t] = u_{k-t}
    for t in 1..=zeta {
        acc += &power * (b * &window[zeta - t]);
        power = a * power;
    }
    Ok(power * freshest + acc)
}

/// Controller estimate at `k + 1`.
///
/// With a reception `(x_{k-zeta}, zeta)` the estimate is
/// `A^{zeta+1} x_{k-zeta} + sum_{t=0}^{zeta} A^t B u_{k-t}`; otherwise it is the
/// open-loop prediction `A x_hat_k + B u_k` (no signaling correction).
/// `inputs` is `u_0..u_k`, ending with the current input.
pub fn controller_update(
    model: &SystemModel,
    x_hat: &DVector<f64>,
    received: Option<(&DVector<f64>, usize)>,
    inputs: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let (a, b) = (model.a(), model.b());
    match received {
        None => {
            let u = inputs
                .last()
                .ok_or_else(|| VoiError::MissingHistory("controller update: no input".into()))?;
            Ok(a * x_hat + b * u)
        }
        Some((x_old, zeta)) => {
            let window = trailing(inputs, zeta + 1, "controller update")?;
            let mut power = DMatrix::identity(a.nrows(), a.ncols());
            let mut acc = DVector::zeros(a.nrows());
            for t in 0..=zeta {
                acc += &power * (b * &window[zeta - t]);
                power = a * power;
            }
            Ok(power * x_old + acc)
        }
    }
}

/// Error `e = x - x_hat` and mismatch `e_tilde = x_check - x_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    pub e: DVector<f64>,
    pub e_tilde: DVector<f64>,
}

impl ErrorState {
    /// Both start at `x_0 - m0`.
    pub fn initial(x0: &DVector<f64>, m0: &DVector<f64>) -> Self {
        let d = x0 - m0;
        ErrorState {
            e: d.clone(),
            e_tilde: d,
        }
    }
}

/// Propagates error and mismatch from `k` to `k + 1`.
///
/// `noises` is `w_0..w_k`. `zeta` is `zeta_k`, `zeta_next` is `zeta_{k+1}`.
pub fn error_recursion(
    model: &SystemModel,
    state: &ErrorState,
    delta: bool,
    zeta: usize,
    zeta_next: usize,
    noises: &[DVector<f64>],
) -> Result<ErrorState> {
    let a = model.a();
    let window = trailing(noises, zeta + 1, "error recursion")?;
    // window[zeta - t] = w_{k-t}
    let mut power = DMatrix::identity(a.nrows(), a.ncols());
    let mut fresh = DVector::zeros(a.nrows());
    let mut innovation = DVector::zeros(a.nrows());
    for t in 0..=zeta {
        let term = &power * &window[zeta - t];
        if t >= zeta_next {
            innovation += &term;
        }
        fresh += term;
        power = a * power;
    }
    let e = if delta { fresh } else { a * &state.e + &window[zeta] };
    let e_tilde = if delta {
        innovation
    } else {
        a * &state.e_tilde + innovation
    };
    Ok(ErrorState { e, e_tilde })
}

/// Closed-form mismatch `sum_{t=zeta+1}^{eta} A^{t-1} w_{k-t}`.
///
/// Before the first transmission (`eta` infinite) the controller still runs
/// on the prior mean, so the sum runs to `k` and `A^k (x_0 - m0)` is added.
/// `noises` is `w_0..w_{k-1}`.
pub fn mismatch_closed_form(
    model: &SystemModel,
    zeta: usize,
    eta: Age,
    k: usize,
    noises: &[DVector<f64>],
    initial_error: &DVector<f64>,
) -> Result<DVector<f64>> {
    let a = model.a();
    let upper = eta.finite().unwrap_or(k);
    if upper > k || noises.len() < k {
        return Err(VoiError::MissingHistory(format!(
            "closed-form mismatch needs w_0..w_{}, have {}",
            k.saturating_sub(1),
            noises.len()
        )));
    }
    let mut power = DMatrix::identity(a.nrows(), a.ncols());
    let mut acc = DVector::zeros(a.nrows());
    for t in 1..=upper {
        if t > zeta {
            acc += &power * &noises[k - t];
        }
        power = a * power;
    }
    if eta.is_infinite() {
        acc += power * initial_error;
    }
    Ok(acc)
}

/// Conditional mean and covariance of `e_{k+1}` given the trigger's
/// information: `(1 - delta) A e_tilde` and `sum_{t=0}^{zeta} A^t W A^t'`.
pub fn conditional_error_moments(
    model: &SystemModel,
    e_tilde: &DVector<f64>,
    delta: bool,
    zeta: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let mean = if delta {
        DVector::zeros(e_tilde.len())
    } else {
        model.a() * e_tilde
    };
    (mean, weighted_power_sum(model, 0, zeta, model.w()))
}

/// `sum_{t=from}^{to} A^t M A^t'` (zero when `from > to`).
fn weighted_power_sum(model: &SystemModel, from: usize, to: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let a = model.a();
    let n = a.nrows();
    let mut power = DMatrix::identity(n, n);
    let mut acc = DMatrix::zeros(n, n);
    for t in 0..=to {
        if t >= from {
            acc += &power * m * power.transpose();
        }
        power = a * power;
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSumCov {
    /// `sum_{t=0}^{zeta} A^t W A^t'`
    pub sigma: DMatrix<f64>,
    /// `sum_{t=zeta+1}^{eta} A^t W A^t'`, plus the propagated prior when
    /// `eta` is infinite.
    pub gap: DMatrix<f64>,
}

/// Noise-sum covariances for ages `(zeta, eta)` at time `k`.
///
/// With `eta` infinite the gap is
/// `sum_{t=zeta+1}^{k} A^t W A^t' + A^{k+1} M0 A^{k+1}'`.
pub fn noise_sum_cov(model: &SystemModel, zeta: usize, eta: Age, k: usize) -> Result<NoiseSumCov> {
    let sigma = weighted_power_sum(model, 0, zeta, model.w());
    let gap = match eta {
        Age::Finite(e) if e < zeta => return Err(VoiError::InvalidAges { zeta, eta: e }),
        Age::Finite(e) => weighted_power_sum(model, zeta + 1, e, model.w()),
        Age::Infinite => {
            let ak1 = model.a().pow((k + 1) as u32);
            weighted_power_sum(model, zeta + 1, k, model.w()) + &ak1 * model.initial_cov() * ak1.transpose()
        }
    };
    Ok(NoiseSumCov { sigma, gap })
}

/// Powers `A^t` and prefix sums `sum_{s=0}^{t} A^s W A^s'` for `t = 0..=max_t`,
/// built once per solve.
#[derive(Debug, Clone)]
pub struct CovarianceCache {
    powers: Vec<DMatrix<f64>>,
    prefix: Vec<DMatrix<f64>>,
    prior: Vec<DMatrix<f64>>,
}

impl CovarianceCache {
    pub fn new(model: &SystemModel, max_t: usize) -> Self {
        let a = model.a();
        let n = a.nrows();
        let mut powers = Vec::with_capacity(max_t + 2);
        let mut prefix = Vec::with_capacity(max_t + 1);
        let mut prior = Vec::with_capacity(max_t + 2);
        let mut p = DMatrix::identity(n, n);
        let mut acc = DMatrix::zeros(n, n);
        for t in 0..=max_t + 1 {
            if t <= max_t {
                acc += &p * model.w() * p.transpose();
                prefix.push(acc.clone());
            }
            prior.push(&p * model.initial_cov() * p.transpose());
            powers.push(p.clone());
            p = a * p;
        }
        CovarianceCache { powers, prefix, prior }
    }

    pub fn max_t(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn power(&self, t: usize) -> &DMatrix<f64> {
        &self.powers[t]
    }

    /// `sum_{s=0}^{t} A^s W A^s'`
    pub fn sigma(&self, t: usize) -> &DMatrix<f64> {
        &self.prefix[t]
    }

    /// `A^t M0 A^t'`
    pub fn propagated_prior(&self, t: usize) -> &DMatrix<f64> {
        &self.prior[t]
    }

    /// Covariance of `e_{k+1}` given only ages, when nothing is sent at `k`:
    /// `sum_{t=0}^{eta} A^t W A^t'`, or for infinite `eta` the open-loop
    /// covariance `sum_{t=0}^{k} A^t W A^t' + A^{k+1} M0 A^{k+1}'`.
    pub fn idle_error_cov(&self, eta: Age, k: usize) -> DMatrix<f64> {
        match eta {
            Age::Finite(e) => self.prefix[e].clone(),
            Age::Infinite => &self.prefix[k] + &self.prior[k + 1],
        }
    }
}
