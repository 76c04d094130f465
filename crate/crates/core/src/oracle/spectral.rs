//! h-functions, their weighted norms, and the twisted (h-reweighted) kernels.
//!
//! With `lambda_p = eta_p(G_p)` the h-functions are
//! `h_{p,n} = Q_{p,n}(1) / prod_{q=p}^{n-1} lambda_q`, computed here through
//! the backward recursion `Q_{p+1}(h_{p+1,n}) = lambda_p h_{p,n}` so every
//! intermediate stays O(1) in scale.

use ndarray::{Array1, Array2};

use super::FkTrajectory;
use crate::model::FiniteModel;
use crate::{Error, Result};

/// All h-functions for a fixed horizon `n`.
#[derive(Debug, Clone)]
pub struct SpectralObjects {
    /// `h[p]` is the vector `h_{p,n}`, `p = 0..=n`.
    pub h: Vec<Array1<f64>>,
    /// `||h_{p,n}||_v` per `p` when the model carries a Lyapunov vector.
    pub v_norms: Option<Vec<f64>>,
    pub horizon: usize,
}

/// Backward pass: returns `w_p = Q_{p,n}(phi) / prod_{q=p}^{n-1} lambda_q`
/// for every `p = 0..=n` (so `w_n = phi`).
pub(crate) fn backward_weighted(
    model: &FiniteModel,
    lambdas: &[f64],
    phi: &Array1<f64>,
    n: usize,
) -> Result<Vec<Array1<f64>>> {
    let mut ws = vec![Array1::zeros(model.dim()); n + 1];
    ws[n] = phi.clone();
    for p in (0..n).rev() {
        let m = model.transition(p + 1)?;
        let g = model.potential(p)?;
        let mut w = m.dot(&ws[p + 1]);
        w = &w * g;
        w.mapv_inplace(|e| e / lambdas[p]);
        ws[p] = w;
    }
    Ok(ws)
}

/// Compute every `h_{p,n}` from an already-computed trajectory.
pub fn spectral_objects(
    model: &FiniteModel,
    traj: &FkTrajectory,
    n: usize,
) -> Result<SpectralObjects> {
    if n > traj.horizon {
        return Err(Error::InvalidArgument(format!(
            "horizon {n} exceeds the trajectory horizon {}",
            traj.horizon
        )));
    }
    let ones = Array1::ones(model.dim());
    let h = backward_weighted(model, &traj.lambdas, &ones, n)?;
    let v_norms = model.lyapunov.as_ref().map(|v_exp| {
        let v = v_exp.mapv(f64::exp);
        h.iter()
            .map(|hp| {
                hp.iter()
                    .zip(v.iter())
                    .map(|(a, b)| a / b)
                    .fold(0.0, f64::max)
            })
            .collect()
    });
    Ok(SpectralObjects { h, v_norms, horizon: n })
}

/// `||h_{p,n}||_v` for an explicit weighting vector `v = exp(V)`.
pub fn h_norms(h: &[Array1<f64>], v_exp: &Array1<f64>) -> Vec<f64> {
    let v = v_exp.mapv(f64::exp);
    h.iter()
        .map(|hp| {
            hp.iter()
                .zip(v.iter())
                .map(|(a, b)| a / b)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Drift ingredients for the twisted-kernel inequality, taken from a
/// certificate: the level `d`, the drift rate `delta`, the on-set constant
/// `b_d`, the minorization constant and its reference measure.
#[derive(Debug, Clone)]
pub struct TwistedDriftSpec {
    pub delta: f64,
    pub d: f64,
    pub b_d: f64,
    pub eps_minus: f64,
    /// Reference probability vector, supported on the level set.
    pub nu: Array1<f64>,
}

/// Drift constants of the twisted kernel at one `(p, n)` pair.
#[derive(Debug, Clone, Copy)]
pub struct TwistedDriftConstants {
    pub rho: f64,
    pub b_big: f64,
    /// `max_x [ S(v_{p,n})(x) - rho v_{p-1,n}(x) - B 1_C(x) ]`; nonpositive
    /// when the drift inequality holds entrywise.
    pub max_violation: f64,
}

/// The twisted kernel `S_{p,n}` and, optionally, its drift data.
#[derive(Debug, Clone)]
pub struct TwistedKernel {
    /// Row-stochastic `K x K` matrix.
    pub s: Array2<f64>,
    /// `(v_{p,n}, v_{p-1,n})` when a Lyapunov vector is present.
    pub v_twist: Option<(Array1<f64>, Array1<f64>)>,
    pub drift: Option<TwistedDriftConstants>,
}

/// Build `S_{p,n}(x, x') = Q_p(x, x') h_{p,n}(x') / (lambda_{p-1} h_{p-1,n}(x))`
/// for `1 <= p <= n`, verifying the drift inequality when `drift` is given.
pub fn twisted_kernel(
    model: &FiniteModel,
    traj: &FkTrajectory,
    p: usize,
    n: usize,
    drift: Option<&TwistedDriftSpec>,
) -> Result<TwistedKernel> {
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!(
            "twisted kernel needs 1 <= p <= n, got p = {p}, n = {n}"
        )));
    }
    let spectral = spectral_objects(model, traj, n)?;
    let h_p = &spectral.h[p];
    let h_pm1 = &spectral.h[p - 1];
    let lambda = traj.lambdas[p - 1];
    let q = model.q_matrix(p)?;
    let k = model.dim();
    let mut s = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            s[(i, j)] = q[(i, j)] * h_p[j] / (lambda * h_pm1[i]);
        }
    }

    let v_twist = model.lyapunov.as_ref().map(|v_vec| {
        let v = v_vec.mapv(f64::exp);
        let norms = h_norms(&spectral.h, v_vec);
        let vp = Array1::from_iter((0..k).map(|i| v[i] * norms[p] / h_p[i]));
        let vpm1 = Array1::from_iter((0..k).map(|i| v[i] * norms[p - 1] / h_pm1[i]));
        (vp, vpm1)
    });

    let drift_constants = match drift {
        None => None,
        Some(spec) => {
            let v_vec = model.lyapunov_vector()?;
            let in_c: Vec<bool> = v_vec.iter().map(|&vi| vi <= spec.d).collect();
            if !in_c.iter().any(|&b| b) {
                return Err(Error::InvalidArgument(format!(
                    "level set C_d is empty at d = {}",
                    spec.d
                )));
            }
            let norms = h_norms(&spectral.h, v_vec);
            let nu_ch: f64 = spec
                .nu
                .iter()
                .zip(h_p.iter())
                .zip(&in_c)
                .map(|((nu, h), &c)| if c { nu * h } else { 0.0 })
                .sum();
            if !(nu_ch > 0.0) {
                return Err(Error::InvalidArgument(
                    "nu_d(1_C h_{p,n}) vanishes".into(),
                ));
            }
            let rho = (-spec.delta * spec.d).exp() / lambda * norms[p] / norms[p - 1];
            let b_big =
                (spec.d * (1.0 - spec.delta) + spec.b_d).exp() / spec.eps_minus * norms[p] / nu_ch;
            let (vp, vpm1) = v_twist.as_ref().expect("lyapunov vector checked");
            let sv = s.dot(vp);
            let max_violation = (0..k)
                .map(|i| sv[i] - rho * vpm1[i] - if in_c[i] { b_big } else { 0.0 })
                .fold(f64::NEG_INFINITY, f64::max);
            Some(TwistedDriftConstants {
                rho,
                b_big,
                max_violation,
            })
        }
    };

    Ok(TwistedKernel {
        s,
        v_twist,
        drift: drift_constants,
    })
}
