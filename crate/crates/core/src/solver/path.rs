//! Dynamic program over the estimation mismatch and the trigger age, for a
//! scalar process.
//!
//! `V_k(zeta, e) = min over delta of theta delta + (1 - delta) A^2 Gamma_{k+1} e^2
//!   + Gamma_{k+1} Sigma(zeta) + E[V_{k+1}(zeta', (1 - delta) A e + n)]`
//!
//! where `n` is zero-mean with variance `sum_{t=zeta'}^{zeta} A^{2t} W` and
//! `zeta'` follows the delay pmf at `k + 1`. Values live on a grid over
//! `[0, E_max]` and are mirrored onto the negative half, so the table is
//! exactly symmetric in `e`. Off-grid lookups interpolate linearly and clamp
//! at `E_max`.

use serde::{Deserialize, Serialize};

use crate::aoi::update_zeta;
use crate::error::{Result, VoiError};
use crate::estimator::CovarianceCache;
use crate::lqr::LqrSchedule;
use crate::model::{NoiseKind, SystemModel};
use crate::quadrature::StandardRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSolverConfig {
    /// Grid half-width; derived from the model when absent.
    #[serde(default)]
    pub e_max: Option<f64>,
    /// Grid intervals on each side of zero.
    #[serde(default = "default_points")]
    pub points_per_side: usize,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
}

fn default_points() -> usize {
    400
}

fn default_order() -> usize {
    21
}

impl Default for PathSolverConfig {
    fn default() -> Self {
        PathSolverConfig {
            e_max: None,
            points_per_side: default_points(),
            quadrature_order: default_order(),
        }
    }
}

/// Symmetric grid `e_i = (i - M) h`, `i = 0..=2M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchGrid {
    pub e_max: f64,
    pub step: f64,
    pub points_per_side: usize,
}

impl MismatchGrid {
    pub fn new(e_max: f64, points_per_side: usize) -> Result<Self> {
        if !(e_max > 0.0 && e_max.is_finite()) || points_per_side == 0 {
            return Err(VoiError::InvalidConfig(format!(
                "grid needs E_max > 0 and at least one interval (got {e_max}, {points_per_side})"
            )));
        }
        Ok(MismatchGrid {
            e_max,
            step: e_max / points_per_side as f64,
            points_per_side,
        })
    }

    pub fn len(&self) -> usize {
        2 * self.points_per_side + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        (i as f64 - self.points_per_side as f64) * self.step
    }

    /// Nonnegative half, `e_i = i h` for `i = 0..=M`.
    fn half_point(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Linear interpolation of a half-grid array at `|e|`, clamped at `E_max`.
    fn interpolate(&self, half: &[f64], e: f64) -> f64 {
        let pos = (e.abs() / self.step).min(self.points_per_side as f64);
        let i = (pos.floor() as usize).min(self.points_per_side - 1);
        let frac = pos - i as f64;
        if frac == 0.0 {
            half[i]
        } else {
            half[i] + frac * (half[i + 1] - half[i])
        }
    }
}

/// Grid solve diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostics {
    /// `(k, zeta)` pairs where `VoI` is still negative at `E_max` although
    /// the immediate term is active, i.e. a threshold may lie off the grid.
    pub boundary_hits: Vec<(usize, usize)>,
    pub suggested_e_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathValueTable {
    pub(crate) horizon: usize,
    pub(crate) zeta_cap: usize,
    pub(crate) theta: f64,
    pub(crate) grid: MismatchGrid,
    /// `A^2 Gamma_{k+1}` for `k = 0..=N`.
    pub(crate) quad_weight: Vec<f64>,
    /// Half-grid arrays, `V` for `k = 0..=N+1` and `VoI`, `rho` for `k = 0..=N`.
    pub(crate) value: Vec<f64>,
    pub(crate) voi: Vec<f64>,
    pub(crate) rho: Vec<f64>,
    /// Variance of `e_0`, for the expected initial value.
    pub(crate) initial_var: f64,
    pub(crate) two_point: bool,
    pub diagnostics: PathDiagnostics,
}

/// Threshold read off a solved table at one `(k, zeta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    /// Smallest `|e|` with `VoI >= 0`, linearly interpolated; `None` when
    /// `VoI < 0` on the whole grid.
    pub value: Option<f64>,
    /// Every sign change of `VoI` on `[0, E_max]`.
    pub crossings: Vec<f64>,
    /// More than one crossing was found.
    pub non_monotone: bool,
}

impl PathValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn zeta_cap(&self) -> usize {
        self.zeta_cap
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn grid(&self) -> &MismatchGrid {
        &self.grid
    }

    fn half_len(&self) -> usize {
        self.grid.points_per_side + 1
    }

    fn row(&self, k: usize, zeta: usize) -> std::ops::Range<usize> {
        let start = (k * (self.zeta_cap + 1) + zeta) * self.half_len();
        start..start + self.half_len()
    }

    fn check(&self, k: usize, zeta: usize, last_k: usize) -> Result<()> {
        if k > last_k || zeta > self.zeta_cap {
            return Err(VoiError::InvalidConfig(format!(
                "state (k = {k}, zeta = {zeta}) outside the path table"
            )));
        }
        Ok(())
    }

    /// Full symmetric row of `V_k(zeta, .)` over the grid points.
    pub fn value_row(&self, k: usize, zeta: usize) -> Result<Vec<f64>> {
        self.check(k, zeta, self.horizon + 1)?;
        Ok(self.mirror(&self.value[self.row(k, zeta)]))
    }

    pub fn voi_row(&self, k: usize, zeta: usize) -> Result<Vec<f64>> {
        self.check(k, zeta, self.horizon)?;
        Ok(self.mirror(&self.voi[self.row(k, zeta)]))
    }

    pub fn rho_row(&self, k: usize, zeta: usize) -> Result<Vec<f64>> {
        self.check(k, zeta, self.horizon)?;
        Ok(self.mirror(&self.rho[self.row(k, zeta)]))
    }

    fn mirror(&self, half: &[f64]) -> Vec<f64> {
        half.iter().rev().chain(half.iter().skip(1)).copied().collect()
    }

    pub fn value_at(&self, k: usize, zeta: usize, e: f64) -> Result<f64> {
        self.check(k, zeta, self.horizon + 1)?;
        Ok(self.grid.interpolate(&self.value[self.row(k, zeta)], e))
    }

    /// `VoI_k(zeta, e)`: the quadratic term is evaluated exactly, the
    /// continuation difference is interpolated. The flag reports clamping.
    pub fn voi_at(&self, k: usize, zeta: usize, e: f64) -> Result<(f64, bool)> {
        self.check(k, zeta, self.horizon)?;
        let rho = self.grid.interpolate(&self.rho[self.row(k, zeta)], e);
        let voi = self.quad_weight[k] * e * e - self.theta + rho;
        Ok((voi, e.abs() > self.grid.e_max))
    }

    /// Expected optimal cost `E[V_0(0, e_0)]`, excluding `||e_0||^2_{Gamma_0}`.
    pub fn initial_value(&self) -> f64 {
        let rule = if self.two_point {
            StandardRule::two_point()
        } else {
            StandardRule::gauss_hermite(default_order()).expect("positive order")
        };
        let row = &self.value[self.row(0, 0)];
        rule.expect(self.initial_var.sqrt(), |e| self.grid.interpolate(row, e))
    }

    /// Switching threshold on `|e|` at `(k, zeta)`.
    pub fn threshold(&self, k: usize, zeta: usize) -> Result<Threshold> {
        self.check(k, zeta, self.horizon)?;
        let voi = &self.voi[self.row(k, zeta)];
        let mut crossings = Vec::new();
        if voi[0] >= 0.0 {
            crossings.push(0.0);
        }
        for i in 1..voi.len() {
            let (a, b) = (voi[i - 1], voi[i]);
            if (a < 0.0) != (b < 0.0) {
                let x0 = self.grid.half_point(i - 1);
                crossings.push(x0 + self.grid.step * (-a) / (b - a));
            }
        }
        let value = if voi[0] >= 0.0 {
            Some(0.0)
        } else {
            crossings.first().copied()
        };
        Ok(Threshold {
            value,
            non_monotone: crossings.len() > 1,
            crossings,
        })
    }
}

/// Default grid half-width: ten standard deviations of the largest one-step
/// mismatch innovation plus twice the smallest threshold the immediate term
/// alone could produce.
pub fn default_e_max(model: &SystemModel, schedule: &LqrSchedule) -> f64 {
    let zeta_cap = model.delay().max_delay().min(model.horizon());
    let cache = CovarianceCache::new(model, zeta_cap);
    let innovation = cache.sigma(zeta_cap)[(0, 0)].sqrt();
    let a2 = model.a()[(0, 0)].powi(2);
    let gamma_max = (0..=model.horizon())
        .map(|k| schedule.gamma(k)[(0, 0)])
        .fold(0.0, f64::max);
    let threshold_scale = if a2 * gamma_max > 0.0 {
        (model.theta() / (a2 * gamma_max)).sqrt()
    } else {
        0.0
    };
    (10.0 * innovation + 2.0 * threshold_scale).max(1e-6)
}

/// Backward sweep of the mismatch Bellman recursion (scalar systems only).
pub fn solve_path_dp(model: &SystemModel, schedule: &LqrSchedule, config: &PathSolverConfig) -> Result<PathValueTable> {
    if model.state_dim() != 1 {
        return Err(VoiError::Unsupported(format!(
            "mismatch-grid solver needs a scalar state, got dimension {}",
            model.state_dim()
        )));
    }
    if schedule.horizon() != model.horizon() {
        return Err(VoiError::InvalidConfig(
            "LQR schedule horizon does not match the model".into(),
        ));
    }
    let horizon = model.horizon();
    let zeta_cap = model.delay().max_delay().min(horizon);
    let e_max = config.e_max.unwrap_or_else(|| default_e_max(model, schedule));
    let grid = MismatchGrid::new(e_max, config.points_per_side)?;
    let two_point = model.noise_kind() == NoiseKind::TwoPoint;
    let rule = if two_point {
        StandardRule::two_point()
    } else {
        StandardRule::gauss_hermite(config.quadrature_order)?
    };

    let a = model.a()[(0, 0)];
    let w = model.w()[(0, 0)];
    let theta = model.theta();
    let cache = CovarianceCache::new(model, zeta_cap);
    let half = grid.points_per_side + 1;
    let rows = (horizon + 2) * (zeta_cap + 1);
    let mut table = PathValueTable {
        horizon,
        zeta_cap,
        theta,
        grid,
        quad_weight: (0..=horizon).map(|k| a * a * schedule.gamma(k + 1)[(0, 0)]).collect(),
        value: vec![0.0; rows * half],
        voi: vec![f64::NAN; rows * half],
        rho: vec![f64::NAN; rows * half],
        initial_var: model.initial_cov()[(0, 0)],
        two_point,
        diagnostics: PathDiagnostics::default(),
    };

    // innovation standard deviation for zeta -> zeta'
    let innovation_sd = |zeta: usize, zeta_next: usize| -> f64 {
        (zeta_next..=zeta).map(|t| a.powi(2 * t as i32) * w).sum::<f64>().sqrt()
    };

    let mut idle_cont = vec![0.0; half];
    for k in (0..=horizon).rev() {
        let gamma = schedule.gamma(k + 1)[(0, 0)];
        let quad = table.quad_weight[k];
        let pmf = model.delay().pmf_at(k + 1);
        for zeta in 0..=zeta_cap {
            let base = gamma * cache.sigma(zeta)[(0, 0)];
            let transitions: Vec<(std::ops::Range<usize>, f64, f64)> = if k == horizon {
                Vec::new()
            } else {
                pmf.iter()
                    .map(|&(tau, p)| {
                        let next = update_zeta(zeta, tau).0.min(zeta_cap);
                        (table.row(k + 1, next), p, innovation_sd(zeta, next))
                    })
                    .collect()
            };

            let mut send_cont = 0.0;
            for (range, p, sd) in &transitions {
                let next = &table.value[range.clone()];
                send_cont += p * rule.expect(*sd, |n| grid.interpolate(next, n));
            }
            for (i, slot) in idle_cont.iter_mut().enumerate() {
                let mean = a * grid.half_point(i);
                *slot = transitions
                    .iter()
                    .map(|(range, p, sd)| {
                        let next = &table.value[range.clone()];
                        p * rule.expect(*sd, |n| grid.interpolate(next, mean + n))
                    })
                    .sum();
            }

            let row = table.row(k, zeta);
            for i in 0..half {
                let e = grid.half_point(i);
                let rho = idle_cont[i] - send_cont;
                let voi = quad * e * e - theta + rho;
                let idle = quad * e * e + base + idle_cont[i];
                let send = theta + base + send_cont;
                table.value[row.start + i] = idle.min(send);
                table.voi[row.start + i] = voi;
                table.rho[row.start + i] = rho;
            }
            if gamma > 0.0 && table.voi[row.end - 1] < 0.0 {
                table.diagnostics.boundary_hits.push((k, zeta));
            }
        }
    }
    if !table.diagnostics.boundary_hits.is_empty() {
        let suggestion = 2.0 * e_max;
        table.diagnostics.suggested_e_max = Some(suggestion);
        log::warn!(
            "VoI stays negative at the grid edge for {} (k, zeta) states; consider E_max = {suggestion:.4}",
            table.diagnostics.boundary_hits.len()
        );
    }
    Ok(table)
}
