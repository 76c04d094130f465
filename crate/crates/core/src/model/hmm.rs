//! Continuous-state hidden Markov models.
//!
//! Signals are Gaussian-driven in one of two forms,
//!
//! * lagged drift: `X_{n+1} = X_n + B(X_n) + sigma(X_n) W_n`,
//! * direct: `X_{n+1} = B(X_n) + W_n`,
//!
//! with `W_n` iid standard normal, applied coordinate-wise. Observation models
//! cover the exact linear-Gaussian case, multivariate binary observations with
//! logistic success probability, Gaussian observations of a (bounded) function
//! of the state, and the scalar stochastic volatility model
//! `Y_n = beta exp(X_n / 2) eps_n`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::ObservationConstraint;
use crate::engine::RandomStream;
use crate::{Error, Result};

/// Rejection cap when constraining simulated observations to the constraint set.
const REJECTION_CAP: usize = 10_000;

/// Scalar drift function applied coordinate-wise.
#[derive(Clone)]
pub enum DriftFn {
    /// `B(x) = -kappa x`, contractive for `kappa` in `(0, 1]`.
    Linear { kappa: f64 },
    /// `B(x) = -kappa x |x| / (1 + |x|)`, bounded slope with linear tails.
    Saturating { kappa: f64 },
    /// `B(x) = x` (random walk in the direct-kernel form).
    Identity,
    /// `B(x) = 0`.
    Zero,
    /// User hook.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl DriftFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DriftFn::Linear { kappa } => -kappa * x,
            DriftFn::Saturating { kappa } => -kappa * x * x.abs() / (1.0 + x.abs()),
            DriftFn::Identity => x,
            DriftFn::Zero => 0.0,
            DriftFn::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for DriftFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftFn::Linear { kappa } => write!(f, "Linear({kappa})"),
            DriftFn::Saturating { kappa } => write!(f, "Saturating({kappa})"),
            DriftFn::Identity => write!(f, "Identity"),
            DriftFn::Zero => write!(f, "Zero"),
            DriftFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Scalar diffusion coefficient, isotropic across coordinates.
#[derive(Clone)]
pub enum SigmaFn {
    Const(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl SigmaFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SigmaFn::Const(s) => *s,
            SigmaFn::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for SigmaFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaFn::Const(s) => write!(f, "Const({s})"),
            SigmaFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Observation function applied coordinate-wise.
#[derive(Clone)]
pub enum HFn {
    Identity,
    /// `sin(x)`: bounded, defeats the quadratic-gain condition random walks need.
    Sin,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl HFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            HFn::Identity => x,
            HFn::Sin => x.sin(),
            HFn::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for HFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HFn::Identity => write!(f, "Identity"),
            HFn::Sin => write!(f, "Sin"),
            HFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// The signal transition kernel.
#[derive(Debug, Clone)]
pub enum SignalKernel {
    /// `X' = X + B(X) + sigma(X) W`.
    Lagged { b: DriftFn, sigma: SigmaFn },
    /// `X' = B(X) + W`.
    Direct { b: DriftFn },
}

impl SignalKernel {
    /// Mean and standard deviation of one coordinate's conditional law.
    pub fn mean_std(&self, x: f64) -> (f64, f64) {
        match self {
            SignalKernel::Lagged { b, sigma } => (x + b.eval(x), sigma.eval(x)),
            SignalKernel::Direct { b } => (b.eval(x), 1.0),
        }
    }
}

/// The observation likelihood family.
#[derive(Debug, Clone)]
pub enum ObsModel {
    /// `Y = X + sqrt(r) zeta` (exact Kalman reference available).
    GaussianCentered { r: f64 },
    /// Coordinate-wise Bernoulli with success probability `1/(1+e^{-x})`.
    Binary,
    /// `Y = H(X) + sigma_y zeta`.
    GaussianOfH { h: HFn, sigma_y: f64 },
    /// `Y = beta exp(X/2) eps`, scalar.
    StochVol { beta: f64 },
}

/// Observation variant selector for the ergodic-drift family.
#[derive(Debug, Clone)]
pub enum ObsKind {
    Binary,
    BoundedHGaussian { h: HFn },
    StochVol { beta: f64 },
}

/// Parameters of the scalar linear-Gaussian model
/// `X_{n+1} = a X_n + sqrt(q) W`, `Y_n = X_n + sqrt(r) zeta`, `X_0 ~ N(m0, p0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianParams {
    pub a: f64,
    pub q: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
}

/// Parameters of the ergodic-drift family.
#[derive(Debug, Clone)]
pub struct ErgodicDriftParams {
    pub dim: usize,
    pub b: DriftFn,
    pub sigma: SigmaFn,
    pub obs: ObsKind,
    /// Optional override of the default constraint set for the variant.
    pub y_star: Option<ObservationConstraint>,
}

/// Parameters of the random-walk family (`B(x) = x` in the direct kernel).
#[derive(Debug, Clone)]
pub struct RandomWalkParams {
    pub h: HFn,
    pub sigma_y: f64,
    /// Defines the quadratic Lyapunov function `V(x) = |x|^2/(2(1+delta0)) + 1`.
    pub delta0: f64,
    pub y_star: ObservationConstraint,
}

/// A continuous-state HMM with Gaussian initial law (iid across coordinates).
#[derive(Debug, Clone)]
pub struct HmmModel {
    pub dim: usize,
    pub signal: SignalKernel,
    /// Initial coordinate-wise `N(mean, var)`.
    pub init_mean: f64,
    pub init_var: f64,
    pub obs: ObsModel,
    pub y_star: ObservationConstraint,
    /// Present for the linear-Gaussian family so the Kalman reference can
    /// consume the exact parameters.
    pub lg_params: Option<LinearGaussianParams>,
    /// Quadratic-Lyapunov parameter for the random-walk family.
    pub delta0: Option<f64>,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn gaussian_log_density(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * z * z
}

impl HmmModel {
    /// Observation dimension (equals the state dimension for every family
    /// shipped here).
    pub fn obs_dim(&self) -> usize {
        self.dim
    }

    pub fn sample_initial(&self, rng: &mut RandomStream, out: &mut [f64]) {
        let sd = self.init_var.sqrt();
        for o in out.iter_mut() {
            *o = self.init_mean + sd * rng.standard_normal();
        }
    }

    pub fn sample_signal(&self, x: &[f64], rng: &mut RandomStream, out: &mut [f64]) {
        for (o, &xi) in out.iter_mut().zip(x) {
            let (m, s) = self.signal.mean_std(xi);
            *o = m + s * rng.standard_normal();
        }
    }

    /// `log f(x, x')`, available in closed form for all shipped kernels.
    pub fn signal_log_density(&self, x: &[f64], x_next: &[f64]) -> f64 {
        x.iter()
            .zip(x_next)
            .map(|(&xi, &xn)| {
                let (m, s) = self.signal.mean_std(xi);
                gaussian_log_density(xn, m, s)
            })
            .sum()
    }

    /// `log g(x, y)` without any constraint-set check.
    pub fn obs_log_lik(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.obs {
            ObsModel::GaussianCentered { r } => {
                let sd = r.sqrt();
                x.iter()
                    .zip(y)
                    .map(|(&xi, &yi)| gaussian_log_density(yi, xi, sd))
                    .sum()
            }
            ObsModel::Binary => x
                .iter()
                .zip(y)
                .map(|(&xi, &yi)| {
                    if yi > 0.5 {
                        -softplus(-xi)
                    } else {
                        -softplus(xi)
                    }
                })
                .sum(),
            ObsModel::GaussianOfH { h, sigma_y } => x
                .iter()
                .zip(y)
                .map(|(&xi, &yi)| gaussian_log_density(yi, h.eval(xi), *sigma_y))
                .sum(),
            ObsModel::StochVol { beta } => {
                let (xi, yi) = (x[0], y[0]);
                -0.5 * (2.0 * PI).ln() - beta.ln() - yi * yi * (-xi).exp() / (2.0 * beta * beta)
                    - xi / 2.0
            }
        }
    }

    /// `log g(x, y_n)` with the support check the stability bounds require.
    pub fn log_potential(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if !self.y_star.contains(y) {
            return Err(Error::ObservationSupport(format!(
                "y = {y:?} is outside {}",
                self.y_star.describe()
            )));
        }
        Ok(self.obs_log_lik(x, y))
    }

    pub fn sample_obs(&self, x: &[f64], rng: &mut RandomStream) -> Vec<f64> {
        match &self.obs {
            ObsModel::GaussianCentered { r } => {
                let sd = r.sqrt();
                x.iter().map(|&xi| xi + sd * rng.standard_normal()).collect()
            }
            ObsModel::Binary => x
                .iter()
                .map(|&xi| {
                    let p = 1.0 / (1.0 + (-xi).exp());
                    if rng.uniform() < p {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            ObsModel::GaussianOfH { h, sigma_y } => x
                .iter()
                .map(|&xi| h.eval(xi) + sigma_y * rng.standard_normal())
                .collect(),
            ObsModel::StochVol { beta } => {
                vec![beta * (x[0] / 2.0).exp() * rng.standard_normal()]
            }
        }
    }

    /// Analytic `sup_{x, y in Y*} g(x, y)`; infinite when the supremum is not
    /// attained uniformly over the constraint set.
    pub fn sup_g(&self) -> f64 {
        match &self.obs {
            ObsModel::GaussianCentered { r } => {
                (2.0 * PI * r).powf(-(self.obs_dim() as f64) / 2.0)
            }
            ObsModel::Binary => 1.0,
            ObsModel::GaussianOfH { sigma_y, .. } => {
                (2.0 * PI * sigma_y * sigma_y).powf(-(self.obs_dim() as f64) / 2.0)
            }
            ObsModel::StochVol { .. } => match &self.y_star {
                // sup_x g(x, y) = (2 pi e)^{-1/2} / |y|, attained uniformly
                // only when |y| is bounded away from zero.
                ObservationConstraint::Annulus { lo, .. } => {
                    (2.0 * PI * std::f64::consts::E).powf(-0.5) / lo
                }
                _ => f64::INFINITY,
            },
        }
    }
}

/// Build the scalar linear-Gaussian model.
pub fn build_linear_gaussian(params: LinearGaussianParams) -> Result<HmmModel> {
    for (name, v) in [("q", params.q), ("r", params.r), ("p0", params.p0)] {
        if !(v > 0.0) {
            return Err(Error::InvalidModel(format!(
                "{name} must be strictly positive, got {v}"
            )));
        }
    }
    let a = params.a;
    Ok(HmmModel {
        dim: 1,
        signal: SignalKernel::Lagged {
            b: DriftFn::Custom(Arc::new(move |x| (a - 1.0) * x)),
            sigma: SigmaFn::Const(params.q.sqrt()),
        },
        init_mean: params.m0,
        init_var: params.p0,
        obs: ObsModel::GaussianCentered { r: params.r },
        y_star: ObservationConstraint::All,
        lg_params: Some(params),
        delta0: None,
    })
}

/// Probe a custom diffusion coefficient for the two-sided bound the lagged
/// kernel requires.
fn validate_sigma(sigma: &SigmaFn) -> Result<()> {
    match sigma {
        SigmaFn::Const(s) => {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "sigma must be strictly positive and finite, got {s}"
                )));
            }
        }
        SigmaFn::Custom(_) => {
            for i in 0..=200 {
                let x = -20.0 + 0.2 * i as f64;
                let s = sigma.eval(x);
                if !(s > 1e-8 && s < 1e8) {
                    return Err(Error::InvalidModel(format!(
                        "sigma({x}) = {s} violates the two-sided bound at a probed point"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Enumerate `{0,1}^d` as the exact constraint set for binary observations.
fn binary_cube(dim: usize) -> Result<ObservationConstraint> {
    if dim > 10 {
        return Err(Error::InvalidModel(
            "binary observation constraint enumeration capped at dimension 10".into(),
        ));
    }
    let points = (0..(1usize << dim))
        .map(|mask| {
            (0..dim)
                .map(|j| if mask >> j & 1 == 1 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(ObservationConstraint::FiniteSet { points })
}

/// Build an ergodic-drift signal (`X' = X + B(X) + sigma(X) W`) with one of
/// the three observation variants.
pub fn build_ergodic_drift_model(params: ErgodicDriftParams) -> Result<HmmModel> {
    if params.dim == 0 {
        return Err(Error::InvalidModel("dimension must be positive".into()));
    }
    if let DriftFn::Linear { kappa } = params.b {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "linear drift needs kappa in (0, 1], got {kappa}"
            )));
        }
    }
    validate_sigma(&params.sigma)?;
    let (obs, default_y_star) = match params.obs {
        ObsKind::Binary => (ObsModel::Binary, binary_cube(params.dim)?),
        ObsKind::BoundedHGaussian { h } => (
            ObsModel::GaussianOfH { h, sigma_y: 1.0 },
            // Compactness is needed for the minorization half of the
            // conditions; half-width 5 keeps the default informative.
            ObservationConstraint::Box {
                lo: vec![-5.0; params.dim],
                hi: vec![5.0; params.dim],
            },
        ),
        ObsKind::StochVol { beta } => {
            if params.dim != 1 {
                return Err(Error::InvalidModel(
                    "stochastic volatility observations are scalar".into(),
                ));
            }
            if !(beta > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "stoch-vol beta must be strictly positive, got {beta}"
                )));
            }
            (
                ObsModel::StochVol { beta },
                ObservationConstraint::Annulus { lo: 0.5, hi: 4.0 },
            )
        }
    };
    let y_star = match params.y_star {
        Some(c) => {
            c.validate()?;
            c
        }
        None => default_y_star,
    };
    Ok(HmmModel {
        dim: params.dim,
        signal: SignalKernel::Lagged {
            b: params.b,
            sigma: params.sigma,
        },
        init_mean: 0.0,
        init_var: 1.0,
        obs,
        y_star,
        lg_params: None,
        delta0: None,
    })
}

/// Build the random-walk signal (`X' = X + W`) observed through `H` with
/// Gaussian noise. The constraint set must be compact.
pub fn build_random_walk_model(params: RandomWalkParams) -> Result<HmmModel> {
    if !(params.sigma_y > 0.0) {
        return Err(Error::InvalidModel(format!(
            "sigma_y must be strictly positive, got {}",
            params.sigma_y
        )));
    }
    if !(params.delta0 > 1.0) {
        return Err(Error::InvalidModel(format!(
            "delta0 must exceed 1, got {}",
            params.delta0
        )));
    }
    if !params.y_star.is_compact() {
        return Err(Error::InvalidModel(
            "compact Y* required for the random-walk family".into(),
        ));
    }
    params.y_star.validate()?;
    Ok(HmmModel {
        dim: 1,
        signal: SignalKernel::Direct {
            b: DriftFn::Identity,
        },
        init_mean: 0.0,
        init_var: 1.0,
        obs: ObsModel::GaussianOfH {
            h: params.h,
            sigma_y: params.sigma_y,
        },
        y_star: params.y_star,
        lg_params: None,
        delta0: Some(params.delta0),
    })
}

/// Simulate a signal/observation path of length `n + 1`. Observations are
/// optionally rejection-resampled into the constraint set; the path is
/// bit-identical for a fixed `(seed, constrain)` pair.
pub fn simulate_hmm(
    model: &HmmModel,
    n: usize,
    seed: u64,
    constrain_to_y_star: bool,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut rng = RandomStream::new(seed, 0);
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut x = vec![0.0; model.dim];
    model.sample_initial(&mut rng, &mut x);
    for step in 0..=n {
        if step > 0 {
            let prev = x.clone();
            model.sample_signal(&prev, &mut rng, &mut x);
        }
        let y = if constrain_to_y_star {
            let mut accepted = None;
            for attempt in 1..=REJECTION_CAP {
                let y = model.sample_obs(&x, &mut rng);
                if model.y_star.contains(&y) {
                    accepted = Some(y);
                    break;
                }
                if attempt == REJECTION_CAP {
                    return Err(Error::Numerical(format!(
                        "observation rejection cap {REJECTION_CAP} exceeded at step {step} \
                         (acceptance rate < {:.2e})",
                        1.0 / REJECTION_CAP as f64
                    )));
                }
            }
            accepted.unwrap()
        } else {
            model.sample_obs(&x, &mut rng)
        };
        xs.push(x.clone());
        ys.push(y);
    }
    Ok((xs, ys))
}
