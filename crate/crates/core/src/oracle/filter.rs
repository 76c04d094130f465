//! Exact prediction-filter recursion and semigroup matrices.

use ndarray::{Array1, Array2};

use crate::model::FiniteModel;
use crate::{Error, Result};

/// Exact trajectory of the normalized flow: prediction filters `eta_p`,
/// one-step normalizers `lambda_p = eta_p(G_p)` and the accumulated
/// `log gamma_p(1) = sum_{q<p} log lambda_q`.
#[derive(Debug, Clone)]
pub struct FkTrajectory {
    /// `eta_0 .. eta_n`, each a probability vector.
    pub etas: Vec<Array1<f64>>,
    /// `lambda_0 .. lambda_{n-1}`.
    pub lambdas: Vec<f64>,
    /// `log gamma_p(1)` for `p = 0..=n` (zero at `p = 0`).
    pub log_gammas: Vec<f64>,
    pub horizon: usize,
}

impl FkTrajectory {
    /// `eta_n(phi)` for a test vector.
    pub fn eta_dot(&self, p: usize, phi: &Array1<f64>) -> f64 {
        self.etas[p].dot(phi)
    }
}

/// Run the normalized recursion
/// `eta_{p+1} = (eta_p . G_p) M_{p+1} / lambda_p` to horizon `n`, exact up to
/// dense floating-point arithmetic. The unnormalized flow is carried in the
/// log domain.
pub fn exact_filter(model: &FiniteModel, n: usize) -> Result<FkTrajectory> {
    let mut etas = Vec::with_capacity(n + 1);
    let mut lambdas = Vec::with_capacity(n);
    let mut log_gammas = Vec::with_capacity(n + 1);
    let mut eta = model.initial.clone();
    etas.push(eta.clone());
    log_gammas.push(0.0);
    for p in 0..n {
        let g = model.potential(p)?;
        let lambda = eta.dot(g);
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Numerical(format!(
                "normalizer eta_{p}(G_{p}) = {lambda}"
            )));
        }
        let weighted = &eta * g;
        let m = model.transition(p + 1)?;
        let mut next = weighted.dot(m);
        let mass = next.sum();
        next.mapv_inplace(|e| e / mass);
        lambdas.push(lambda);
        log_gammas.push(log_gammas[p] + lambda.ln());
        eta = next;
        etas.push(eta.clone());
    }
    Ok(FkTrajectory {
        etas,
        lambdas,
        log_gammas,
        horizon: n,
    })
}

/// The semigroup matrix `Q_{p,n} = Q_{p+1} ... Q_n` with the conventions
/// `Q_{n,n} = Q_{n+1,n} = Id`. Anything beyond `p = n + 1` is an error.
pub fn semigroup_matrix(model: &FiniteModel, p: usize, n: usize) -> Result<Array2<f64>> {
    if p > n + 1 {
        return Err(Error::InvalidArgument(format!(
            "semigroup Q_{{{p},{n}}} undefined: p may exceed n by at most 1"
        )));
    }
    let k = model.dim();
    let mut acc = Array2::eye(k);
    if p >= n {
        return Ok(acc);
    }
    for q in (p + 1)..=n {
        acc = acc.dot(&model.q_matrix(q)?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_finite_model, Steps};
    use ndarray::array;

    fn two_state(g: [f64; 2]) -> FiniteModel {
        build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(array![g[0], g[1]]),
            array![0.5, 0.5],
            None,
        )
        .unwrap()
    }

    #[test]
    fn unit_potential_flow_is_markov() {
        let m = two_state([1.0, 1.0]);
        let t = exact_filter(&m, 5).unwrap();
        assert!(t.lambdas.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        assert!(t.log_gammas.iter().all(|&z| z.abs() < 1e-14));
        // eta_n = mu M^n
        let mut mu = array![0.5, 0.5];
        for p in 1..=5 {
            mu = mu.dot(m.transition(1).unwrap());
            let diff = (&mu - &t.etas[p]).mapv(f64::abs).sum();
            assert!(diff < 1e-14);
        }
    }

    #[test]
    fn hand_computed_two_state_values() {
        // lambda_0 = mu(G) = 1.5, eta_1 = [2/3, 1/3],
        // lambda_1 = 2*(2/3) + 1/3 = 5/3, gamma_2(1) = 1.5 * 5/3 = 2.5.
        let m = two_state([2.0, 1.0]);
        let t = exact_filter(&m, 2).unwrap();
        assert!((t.lambdas[0] - 1.5).abs() < 1e-15);
        assert!((t.etas[1][0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.etas[1][1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.lambdas[1] - 5.0 / 3.0).abs() < 1e-14);
        assert!((t.log_gammas[2] - 2.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn point_mass_initial() {
        let m = build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(array![2.0, 1.0]),
            array![1.0, 0.0],
            None,
        )
        .unwrap();
        let t = exact_filter(&m, 0).unwrap();
        assert_eq!(t.etas[0], array![1.0, 0.0]);
    }

    #[test]
    fn semigroup_conventions() {
        let m = two_state([2.0, 1.0]);
        let id = semigroup_matrix(&m, 3, 3).unwrap();
        assert_eq!(id, Array2::eye(2));
        let id2 = semigroup_matrix(&m, 4, 3).unwrap();
        assert_eq!(id2, Array2::eye(2));
        assert!(semigroup_matrix(&m, 5, 3).is_err());
        let q01 = semigroup_matrix(&m, 0, 1).unwrap();
        assert_eq!(q01, array![[1.8, 0.2], [0.2, 0.8]]);
    }

    #[test]
    fn log_gamma_equals_lambda_product() {
        let m = crate::model::random_model(3, 6, 12);
        let t = exact_filter(&m, 12).unwrap();
        let mut acc = 0.0;
        for p in 0..12 {
            acc += t.lambdas[p].ln();
            assert!((t.log_gammas[p + 1] - acc).abs() < 1e-10 * (p + 1) as f64);
        }
    }
}
