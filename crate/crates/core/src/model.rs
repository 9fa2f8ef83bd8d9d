//! Problem data, process dynamics, the delayed-output model and all random
//! sampling.
//!
//! A model is read from JSON into a [`ModelSpec`] (plain serde data, unknown
//! keys rejected) and validated into an immutable [`SystemModel`].
//! Matrices are row-major nested arrays.

use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Result, VoiError};

const PMF_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Probability that the output is undelayed, either constant or per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepProbability {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl StepProbability {
    fn at(&self, k: usize) -> f64 {
        match self {
            StepProbability::Constant(p) => *p,
            StepProbability::PerStep(ps) => ps[k],
        }
    }
}

/// Processing delay distribution for `tau_k`, `k >= 1`. `tau_0 = 0` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    /// Outputs are never delayed.
    None,
    /// Delay 0 with probability `p_k`, delay `d` otherwise.
    BernoulliFixed { d: usize, p: StepProbability },
    /// Arbitrary pmf over delays `0..pmf.len()`.
    General { pmf: Vec<f64> },
}

impl DelayModel {
    /// Largest delay with positive support.
    pub fn max_delay(&self) -> usize {
        match self {
            DelayModel::None => 0,
            DelayModel::BernoulliFixed { d, .. } => *d,
            DelayModel::General { pmf } => pmf.len().saturating_sub(1),
        }
    }

    /// Support of `tau_k` as `(delay, probability)` pairs with nonzero mass.
    pub fn pmf_at(&self, k: usize) -> Vec<(usize, f64)> {
        if k == 0 {
            return vec![(0, 1.0)];
        }
        let raw: Vec<(usize, f64)> = match self {
            DelayModel::None => vec![(0, 1.0)],
            DelayModel::BernoulliFixed { d, p } => {
                let p = p.at(k);
                vec![(0, p), (*d, 1.0 - p)]
            }
            DelayModel::General { pmf } => pmf.iter().copied().enumerate().collect(),
        };
        raw.into_iter().filter(|&(_, m)| m > 0.0).collect()
    }

    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    fn quantile(&self, k: usize, u: f64) -> usize {
        if k == 0 {
            return 0;
        }
        match self {
            DelayModel::None => 0,
            DelayModel::BernoulliFixed { d, p } => {
                if u < p.at(k) {
                    0
                } else {
                    *d
                }
            }
            DelayModel::General { pmf } => {
                let mut acc = 0.0;
                for (delay, &m) in pmf.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        return delay;
                    }
                }
                // rounding slack: fall back to the last delay with mass
                pmf.iter().rposition(|&m| m > 0.0).unwrap_or(0)
            }
        }
    }

    fn validate(&self, horizon: usize) -> Result<()> {
        let bad = |m: String| Err(VoiError::InvalidModel(m));
        match self {
            DelayModel::None => Ok(()),
            DelayModel::BernoulliFixed { d, p } => {
                if *d == 0 {
                    return bad("bernoulli_fixed delay d must be positive".into());
                }
                let probs: &[f64] = match p {
                    StepProbability::Constant(p) => std::slice::from_ref(p),
                    StepProbability::PerStep(ps) => {
                        if ps.len() < horizon + 1 {
                            return bad(format!(
                                "per-step p has {} entries, horizon needs {}",
                                ps.len(),
                                horizon + 1
                            ));
                        }
                        ps
                    }
                };
                if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return bad("delay probability outside [0, 1]".into());
                }
                Ok(())
            }
            DelayModel::General { pmf } => {
                if pmf.is_empty() {
                    return bad("delay pmf is empty".into());
                }
                if pmf.iter().any(|m| !m.is_finite() || *m < 0.0) {
                    return bad("delay pmf has a negative or non-finite mass".into());
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > PMF_TOL {
                    return bad(format!("delay pmf sums to {total}, not 1"));
                }
                Ok(())
            }
        }
    }
}

/// Distribution of the standardized process noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Independent equiprobable +-1 components (test mode only).
    TwoPoint,
}

/// Serialized form of a model. Field names follow the usual control notation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ModelSpec {
    pub A: Vec<Vec<f64>>,
    pub B: Vec<Vec<f64>>,
    pub W: Vec<Vec<f64>>,
    pub Q: Vec<Vec<f64>>,
    pub R: Vec<Vec<f64>>,
    pub m0: Vec<f64>,
    pub M0: Vec<Vec<f64>>,
    pub N: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    pub delay: DelayModel,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub test_mode: bool,
}

impl ModelSpec {
    /// Scalar system with the given coefficients and communication weight.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(
        a: f64,
        b: f64,
        w: f64,
        q: f64,
        r: f64,
        m0: f64,
        big_m0: f64,
        horizon: usize,
        theta: f64,
        delay: DelayModel,
    ) -> Self {
        ModelSpec {
            A: vec![vec![a]],
            B: vec![vec![b]],
            W: vec![vec![w]],
            Q: vec![vec![q]],
            R: vec![vec![r]],
            m0: vec![m0],
            M0: vec![vec![big_m0]],
            N: horizon,
            theta: Some(theta),
            lambda: None,
            ell: None,
            delay,
            noise: NoiseKind::Gaussian,
            test_mode: false,
        }
    }

    /// The unstable scalar benchmark: A = 1.1, B = 1, W = 1, m0 = 0, M0 = 1,
    /// N = 200, theta = 10, Q = 1, R = 0.1, delay 5 with p = 0.2.
    pub fn scalar_benchmark() -> Self {
        Self::scalar(
            1.1,
            1.0,
            1.0,
            1.0,
            0.1,
            0.0,
            1.0,
            200,
            10.0,
            DelayModel::BernoulliFixed {
                d: 5,
                p: StepProbability::Constant(0.2),
            },
        )
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<SystemModel> {
        SystemModel::from_spec(self.clone())
    }
}

fn matrix(rows: &[Vec<f64>], name: &'static str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(VoiError::InvalidModel(format!("{name} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(VoiError::InvalidModel(format!("{name} has ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(VoiError::InvalidModel(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn check_shape(m: &DMatrix<f64>, r: usize, c: usize, name: &'static str) -> Result<()> {
    if m.shape() != (r, c) {
        return Err(VoiError::dim(
            name,
            format!("{r}x{c}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > PSD_TOL * scale {
        return Err(VoiError::InvalidModel(format!("{name} is not symmetric")));
    }
    Ok(())
}

/// Symmetric square root `U sqrt(D) U^T` of a PSD matrix; negative
/// eigenvalues within tolerance are clipped to zero.
fn psd_factor(m: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let scale = m.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -PSD_TOL * scale) {
        return Err(VoiError::InvalidModel(format!("{name} is not positive semidefinite")));
    }
    let sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * sqrt_d * eig.eigenvectors.transpose())
}

/// Validated, immutable problem data.
#[derive(Debug, Clone)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    w: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    m0: DVector<f64>,
    big_m0: DMatrix<f64>,
    horizon: usize,
    theta: f64,
    lambda: Option<f64>,
    delay: DelayModel,
    noise: NoiseKind,
    test_mode: bool,
    noise_factor: DMatrix<f64>,
    init_factor: DMatrix<f64>,
    spec: ModelSpec,
}

impl SystemModel {
    pub fn from_spec(spec: ModelSpec) -> Result<Self> {
        let a = matrix(&spec.A, "A")?;
        let n = a.nrows();
        check_shape(&a, n, n, "A")?;
        let b = matrix(&spec.B, "B")?;
        let m = b.ncols();
        check_shape(&b, n, m, "B")?;
        let w = matrix(&spec.W, "W")?;
        check_shape(&w, n, n, "W")?;
        let q = matrix(&spec.Q, "Q")?;
        check_shape(&q, n, n, "Q")?;
        let r = matrix(&spec.R, "R")?;
        check_shape(&r, m, m, "R")?;
        let big_m0 = matrix(&spec.M0, "M0")?;
        check_shape(&big_m0, n, n, "M0")?;
        if spec.m0.len() != n {
            return Err(VoiError::dim("m0", n, spec.m0.len()));
        }
        let m0 = DVector::from_column_slice(&spec.m0);

        for (mat, name) in [(&w, "W"), (&q, "Q"), (&r, "R"), (&big_m0, "M0")] {
            check_symmetric(mat, name)?;
        }
        if r.clone().cholesky().is_none() {
            return Err(VoiError::NotPositiveDefinite("R"));
        }
        psd_factor(&q, "Q")?;
        let init_factor = psd_factor(&big_m0, "M0")?;
        let noise_factor = match w.clone().cholesky() {
            Some(c) => c.l(),
            None if spec.test_mode => psd_factor(&w, "W")?,
            None => return Err(VoiError::NotPositiveDefinite("W")),
        };
        if spec.noise == NoiseKind::TwoPoint && !spec.test_mode {
            return Err(VoiError::InvalidModel(
                "two-point noise is only available with test_mode".into(),
            ));
        }

        let theta = resolve_theta(spec.theta, spec.lambda, spec.ell)?;
        spec.delay.validate(spec.N)?;

        Ok(SystemModel {
            a,
            b,
            w,
            q,
            r,
            m0,
            big_m0,
            horizon: spec.N,
            theta,
            lambda: spec.lambda,
            delay: spec.delay.clone(),
            noise: spec.noise,
            test_mode: spec.test_mode,
            noise_factor,
            init_factor,
            spec,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        ModelSpec::from_path(path)?.validate()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn m0(&self) -> &DVector<f64> {
        &self.m0
    }
    pub fn initial_cov(&self) -> &DMatrix<f64> {
        &self.big_m0
    }
    /// Last time index; time runs over `0..=horizon`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    /// Trade-off multiplier, when known.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }
    /// Per-transmission weight recovered from `theta` and `lambda`.
    pub fn ell(&self) -> Option<f64> {
        self.lambda.map(|l| self.theta * l / (1.0 - l))
    }
    pub fn delay(&self) -> &DelayModel {
        &self.delay
    }
    pub fn noise_kind(&self) -> NoiseKind {
        self.noise
    }
    pub fn test_mode(&self) -> bool {
        self.test_mode
    }
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Copy of this model with a different communication weight. Any
    /// trade-off multiplier is dropped since it no longer matches.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.theta = Some(theta);
        spec.lambda = None;
        spec.ell = None;
        Self::from_spec(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.spec).expect("model spec serializes")
    }
}

fn resolve_theta(theta: Option<f64>, lambda: Option<f64>, ell: Option<f64>) -> Result<f64> {
    let bad = |m: &str| Err(VoiError::InvalidModel(m.to_string()));
    if let Some(l) = lambda {
        if !(l > 0.0 && l < 1.0) {
            return bad("lambda must lie in (0, 1)");
        }
    }
    if let Some(e) = ell {
        if !(e > 0.0 && e.is_finite()) {
            return bad("ell must be positive");
        }
    }
    let derived = match (lambda, ell) {
        (Some(l), Some(e)) => Some(e * (1.0 - l) / l),
        (None, Some(_)) => return bad("ell given without lambda"),
        _ => None,
    };
    let theta = match (theta, derived) {
        (Some(t), Some(d)) => {
            if (t - d).abs() > 1e-12 * d.abs().max(1.0) {
                return bad("theta disagrees with ell (1 - lambda) / lambda");
            }
            d
        }
        (Some(t), None) => t,
        (None, Some(d)) => d,
        (None, None) => return bad("either theta or (lambda, ell) is required"),
    };
    if !(theta > 0.0 && theta.is_finite()) {
        return bad("theta must be positive");
    }
    Ok(theta)
}

/// Deterministic per-trajectory random stream.
///
/// A run is identified by `(seed, stream)`; ChaCha's stream selector keeps
/// runs independent without sequential splitting.
#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self::for_stream(seed, 0)
    }

    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SimRng { inner }
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn sign(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

/// `x_{k+1} = A x_k + B u_k + w_k`.
pub fn step_dynamics(
    model: &SystemModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = model.state_dim();
    if x.len() != n {
        return Err(VoiError::dim("step_dynamics state", n, x.len()));
    }
    if w.len() != n {
        return Err(VoiError::dim("step_dynamics noise", n, w.len()));
    }
    if u.len() != model.input_dim() {
        return Err(VoiError::dim("step_dynamics input", model.input_dim(), u.len()));
    }
    Ok(model.a() * x + model.b() * u + w)
}

fn standardized(kind: NoiseKind, n: usize, rng: &mut SimRng) -> DVector<f64> {
    match kind {
        NoiseKind::Gaussian => DVector::from_fn(n, |_, _| rng.standard_normal()),
        NoiseKind::TwoPoint => DVector::from_fn(n, |_, _| rng.sign()),
    }
}

/// One draw of `w_k` with covariance `W`.
pub fn sample_noise(model: &SystemModel, rng: &mut SimRng) -> DVector<f64> {
    let z = standardized(model.noise, model.state_dim(), rng);
    &model.noise_factor * z
}

/// One draw of the initial state `x_0` with mean `m0` and covariance `M0`.
pub fn sample_initial_state(model: &SystemModel, rng: &mut SimRng) -> DVector<f64> {
    let z = standardized(model.noise, model.state_dim(), rng);
    &model.m0 + &model.init_factor * z
}

/// Draw of the processing delay `tau_k`; `tau_0 = 0`. Not clamped to `k`.
pub fn sample_delay(model: &SystemModel, k: usize, rng: &mut SimRng) -> usize {
    let u = rng.uniform();
    model.delay.quantile(k, u)
}

/// `y_k = x_{k - tau_k}`, with delays reaching before time 0 clamped to `x_0`.
/// `history` holds `x_0..=x_k`.
pub fn sample_output(history: &[DVector<f64>], k: usize, tau: usize) -> Result<&DVector<f64>> {
    if history.is_empty() {
        return Err(VoiError::MissingHistory("empty state history".into()));
    }
    if history.len() < k + 1 {
        return Err(VoiError::MissingHistory(format!(
            "need x_0..x_{k}, have {} states",
            history.len()
        )));
    }
    Ok(&history[k.saturating_sub(tau)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_model(a: f64, b: f64) -> SystemModel {
        let mut spec = ModelSpec::scalar_benchmark();
        spec.A = vec![vec![a]];
        spec.B = vec![vec![b]];
        spec.validate().unwrap()
    }

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn dynamics_hand_values() {
        let m = scalar_model(1.1, 1.0);
        assert_eq!(step_dynamics(&m, &v(1.0), &v(0.0), &v(0.0)).unwrap()[0], 1.1);
        let x = step_dynamics(&m, &v(2.0), &v(-1.0), &v(0.5)).unwrap()[0];
        assert!((x - 1.7).abs() < 1e-15);
        let id = scalar_model(1.0, 0.0);
        assert_eq!(step_dynamics(&id, &v(-3.25), &v(7.0), &v(0.0)).unwrap()[0], -3.25);
    }

    #[test]
    fn dynamics_rejects_bad_dims() {
        let m = scalar_model(1.1, 1.0);
        let x2 = DVector::from_element(2, 1.0);
        assert!(matches!(
            step_dynamics(&m, &x2, &v(0.0), &v(0.0)),
            Err(VoiError::Dimension { .. })
        ));
    }

    #[test]
    fn zero_noise_requires_test_mode() {
        let mut spec = ModelSpec::scalar_benchmark();
        spec.W = vec![vec![0.0]];
        assert!(matches!(spec.validate(), Err(VoiError::NotPositiveDefinite("W"))));
        spec.test_mode = true;
        let m = spec.validate().unwrap();
        let mut rng = SimRng::new(3);
        assert_eq!(sample_noise(&m, &mut rng)[0], 0.0);
    }

    #[test]
    fn noise_is_reproducible() {
        let m = ModelSpec::scalar_benchmark().validate().unwrap();
        let a = sample_noise(&m, &mut SimRng::new(42));
        let b = sample_noise(&m, &mut SimRng::new(42));
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        let c = sample_noise(&m, &mut SimRng::for_stream(42, 1));
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn noise_mean_and_whiteness() {
        let m = ModelSpec::scalar_benchmark().validate().unwrap();
        let mut rng = SimRng::new(7);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sample_noise(&m, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");

        // lag-1 autocovariance over 1e5 steps, standard error ~ 1/sqrt(n)
        let n = 100_000;
        let lag1 = draws[..n].windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
        assert!(lag1.abs() < 3.0 / (n as f64).sqrt(), "lag1 {lag1}");
    }

    #[test]
    fn delay_examples() {
        let m = ModelSpec::scalar_benchmark().validate().unwrap();
        let mut rng = SimRng::new(11);
        assert_eq!(sample_delay(&m, 0, &mut rng), 0);

        let mut spec = ModelSpec::scalar_benchmark();
        spec.delay = DelayModel::BernoulliFixed {
            d: 5,
            p: StepProbability::Constant(1.0),
        };
        let always = spec.validate().unwrap();
        assert!((1..1000).all(|k| sample_delay(&always, k, &mut rng) == 0));

        let n = 100_000;
        let zeros = (1..=n).filter(|&k| sample_delay(&m, k, &mut rng) == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.2).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn general_pmf_histogram_matches() {
        let pmf = vec![0.1, 0.0, 0.35, 0.25, 0.3];
        let mut spec = ModelSpec::scalar_benchmark();
        spec.delay = DelayModel::General { pmf: pmf.clone() };
        let m = spec.validate().unwrap();
        let mut rng = SimRng::new(5);
        let n = 100_000;
        let mut hist = vec![0usize; pmf.len()];
        for k in 1..=n {
            hist[sample_delay(&m, k, &mut rng)] += 1;
        }
        for (bin, &p) in pmf.iter().enumerate() {
            let f = hist[bin] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() <= 3.0 * se.max(1e-12), "bin {bin}: {f} vs {p}");
        }
    }

    #[test]
    fn pmf_must_sum_to_one() {
        let mut spec = ModelSpec::scalar_benchmark();
        spec.delay = DelayModel::General { pmf: vec![0.5, 0.4] };
        assert!(matches!(spec.validate(), Err(VoiError::InvalidModel(_))));
    }

    #[test]
    fn output_sampling_clamps() {
        let hist: Vec<DVector<f64>> = (0..=10).map(|i| v(i as f64)).collect();
        assert_eq!(sample_output(&hist, 10, 0).unwrap()[0], 10.0);
        assert_eq!(sample_output(&hist, 10, 5).unwrap()[0], 5.0);
        assert_eq!(sample_output(&hist[..3], 2, 5).unwrap()[0], 0.0);
        assert!(sample_output(&[], 0, 0).is_err());
    }

    #[test]
    fn theta_from_tradeoff() {
        let mut spec = ModelSpec::scalar_benchmark();
        spec.theta = None;
        spec.lambda = Some(0.5);
        spec.ell = Some(10.0);
        let m = spec.validate().unwrap();
        assert_eq!(m.theta(), 10.0);
        assert_eq!(m.ell(), Some(10.0));

        spec.theta = Some(9.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"A":[[1.1]],"B":[[1]],"W":[[1]],"Q":[[1]],"R":[[0.1]],
            "m0":[0],"M0":[[1]],"N":200,"theta":10,
            "delay":{"kind":"bernoulli_fixed","d":5,"p":0.2},"bogus":1}"#;
        assert!(ModelSpec::from_json_str(text).is_err());
        let ok = text.replace(r#","bogus":1"#, "");
        let m = ModelSpec::from_json_str(&ok).unwrap().validate().unwrap();
        assert_eq!(m.horizon(), 200);
        assert_eq!(m.delay().max_delay(), 5);
    }
}
