//! Fully enumerated Feynman-Kac models on a finite state space.
//!
//! A model is a triple `(mu, (M_n), (G_n))` of an initial probability vector,
//! row-stochastic transition matrices and strictly positive potential vectors,
//! optionally carrying a Lyapunov vector `V >= 1`. The weighted kernels are
//! `Q_n(x, x') = G_{n-1}(x) M_n(x, x')`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Per-step data that may be shared across all steps of a time-homogeneous
/// model or given explicitly for each step.
#[derive(Debug, Clone, PartialEq)]
pub enum Steps<T> {
    Homogeneous(T),
    PerStep(Vec<T>),
}

impl<T> Steps<T> {
    /// Value at step index `i` (0-based). Per-step sequences are an error to
    /// index past their end.
    pub fn at(&self, i: usize) -> Result<&T> {
        match self {
            Steps::Homogeneous(t) => Ok(t),
            Steps::PerStep(v) => v.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "step {i} requested but only {} steps are defined",
                    v.len()
                ))
            }),
        }
    }

    /// Number of distinct steps stored (`None` for homogeneous data).
    pub fn len(&self) -> Option<usize> {
        match self {
            Steps::Homogeneous(_) => None,
            Steps::PerStep(v) => Some(v.len()),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Steps::Homogeneous(_))
    }

    /// Iterate over every distinct value (one for homogeneous data).
    pub fn distinct(&self) -> Box<dyn Iterator<Item = &T> + '_> {
        match self {
            Steps::Homogeneous(t) => Box::new(std::iter::once(t)),
            Steps::PerStep(v) => Box::new(v.iter()),
        }
    }
}

/// A validated finite-state Feynman-Kac model.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    /// State labels, length `K`.
    pub states: Vec<String>,
    /// Transition matrices; `transition(n)` is the kernel taking `X_{n-1}` to
    /// `X_n`, for `n >= 1`.
    transitions: Steps<Array2<f64>>,
    /// Potential vectors `G_n`, `n >= 0`, stored in the linear domain.
    potentials: Steps<Array1<f64>>,
    /// Log-potentials, kept alongside to avoid re-taking logs in the engine.
    log_potentials: Steps<Array1<f64>>,
    /// Initial probability vector.
    pub initial: Array1<f64>,
    /// Optional Lyapunov vector `V` with `min V >= 1`.
    pub lyapunov: Option<Array1<f64>>,
}

/// Validate and build a model. Potentials are stored in the log domain as
/// well as linearly.
pub fn build_finite_model(
    transitions: Steps<Array2<f64>>,
    potentials: Steps<Array1<f64>>,
    initial: Array1<f64>,
    lyapunov: Option<Array1<f64>>,
) -> Result<FiniteModel> {
    let k = initial.len();
    if k == 0 {
        return Err(Error::InvalidModel("empty state space".into()));
    }
    for m in transitions.distinct() {
        if m.nrows() != k || m.ncols() != k {
            return Err(Error::InvalidModel(format!(
                "transition matrix is {}x{} but the state space has {k} states",
                m.nrows(),
                m.ncols()
            )));
        }
        for (i, row) in m.outer_iter().enumerate() {
            if let Some((j, &e)) = row.iter().enumerate().find(|(_, &e)| e < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "transition entry ({i},{j}) is negative: {e}"
                )));
            }
            let s: f64 = row.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!("row {i} sums to {s}")));
            }
        }
    }
    for g in potentials.distinct() {
        if g.len() != k {
            return Err(Error::InvalidModel(format!(
                "potential vector has length {} but the state space has {k} states",
                g.len()
            )));
        }
        if let Some((i, &e)) = g.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "potential entry {i} is not strictly positive: {e}"
            )));
        }
    }
    if let Some((i, &e)) = initial.iter().enumerate().find(|(_, &e)| e < 0.0) {
        return Err(Error::InvalidModel(format!(
            "initial entry {i} is negative: {e}"
        )));
    }
    let s: f64 = initial.sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("initial vector sums to {s}")));
    }
    if let Some(v) = &lyapunov {
        if v.len() != k {
            return Err(Error::InvalidModel(
                "lyapunov vector length mismatch".into(),
            ));
        }
        if let Some((i, &e)) = v.iter().enumerate().find(|(_, &e)| e < 1.0) {
            return Err(Error::InvalidModel(format!(
                "lyapunov entry {i} is {e} < 1"
            )));
        }
    }
    let log_potentials = match &potentials {
        Steps::Homogeneous(g) => Steps::Homogeneous(g.mapv(f64::ln)),
        Steps::PerStep(gs) => Steps::PerStep(gs.iter().map(|g| g.mapv(f64::ln)).collect()),
    };
    Ok(FiniteModel {
        states: (0..k).map(|i| format!("s{i}")).collect(),
        transitions,
        potentials,
        log_potentials,
        initial,
        lyapunov,
    })
}

impl FiniteModel {
    /// Number of states.
    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    /// Transition matrix `M_n` for `n >= 1`.
    pub fn transition(&self, n: usize) -> Result<&Array2<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "transition index starts at 1".into(),
            ));
        }
        self.transitions.at(n - 1)
    }

    /// Potential vector `G_n` for `n >= 0`.
    pub fn potential(&self, n: usize) -> Result<&Array1<f64>> {
        self.potentials.at(n)
    }

    /// Log potential vector `log G_n`.
    pub fn log_potential(&self, n: usize) -> Result<&Array1<f64>> {
        self.log_potentials.at(n)
    }

    /// Weighted kernel `Q_n = diag(G_{n-1}) M_n` for `n >= 1`.
    pub fn q_matrix(&self, n: usize) -> Result<Array2<f64>> {
        let m = self.transition(n)?;
        let g = self.potential(n - 1)?;
        let mut q = m.clone();
        for (i, mut row) in q.outer_iter_mut().enumerate() {
            row.mapv_inplace(|e| e * g[i]);
        }
        Ok(q)
    }

    /// True when both transitions and potentials are time-homogeneous.
    pub fn is_homogeneous(&self) -> bool {
        self.transitions.is_homogeneous() && self.potentials.is_homogeneous()
    }

    /// Largest horizon with fully defined data, if per-step data is present.
    pub fn max_horizon(&self) -> Option<usize> {
        match (self.transitions.len(), self.potentials.len()) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(usize::MAX).min(b.unwrap_or(usize::MAX))),
        }
    }

    /// The distinct Q matrices present in the model, with the step index of
    /// the first occurrence (step `n >= 1`).
    pub fn distinct_q_matrices(&self, horizon_hint: usize) -> Result<Vec<(usize, Array2<f64>)>> {
        if self.is_homogeneous() {
            Ok(vec![(1, self.q_matrix(1)?)])
        } else {
            let max = self.max_horizon().unwrap_or(horizon_hint).min(horizon_hint);
            (1..=max).map(|n| Ok((n, self.q_matrix(n)?))).collect()
        }
    }

    /// Lyapunov vector, or an error when absent.
    pub fn lyapunov_vector(&self) -> Result<&Array1<f64>> {
        self.lyapunov.as_ref().ok_or_else(|| {
            Error::InvalidArgument("operation requires a lyapunov vector".into())
        })
    }
}

/// Draw a random finite model for randomized identity suites. Deterministic
/// given the seed. Roughly half the models are time-inhomogeneous with
/// `steps` distinct transition/potential pairs.
pub fn random_model(seed: u64, max_k: usize, steps: usize) -> FiniteModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=max_k.max(2));
    let mut rand_matrix = |rng: &mut ChaCha12Rng| {
        let mut m = Array2::zeros((k, k));
        for mut row in m.outer_iter_mut() {
            let mut s = 0.0;
            for e in row.iter_mut() {
                *e = rng.random_range(0.02..1.0);
                s += *e;
            }
            row.mapv_inplace(|e| e / s);
        }
        m
    };
    let rand_potential = |rng: &mut ChaCha12Rng| {
        Array1::from_iter((0..k).map(|_| f64::exp(rng.random_range(-1.0..1.0))))
    };
    let inhomogeneous = rng.random_bool(0.5);
    let transitions = if inhomogeneous {
        Steps::PerStep((0..steps).map(|_| rand_matrix(&mut rng)).collect())
    } else {
        Steps::Homogeneous(rand_matrix(&mut rng))
    };
    let potentials = if inhomogeneous {
        Steps::PerStep((0..=steps).map(|_| rand_potential(&mut rng)).collect())
    } else {
        Steps::Homogeneous(rand_potential(&mut rng))
    };
    let mut mu = Array1::from_iter((0..k).map(|_| rng.random_range(0.05..1.0)));
    let s = mu.sum();
    mu.mapv_inplace(|e| e / s);
    let v = Array1::from_iter((0..k).map(|_| 1.0 + rng.random_range(0.0..2.0)));
    build_finite_model(transitions, potentials, mu, Some(v)).expect("random model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state() -> FiniteModel {
        build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(array![2.0, 1.0]),
            array![0.5, 0.5],
            None,
        )
        .unwrap()
    }

    #[test]
    fn unit_potential_model_builds() {
        let m = build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(array![1.0, 1.0]),
            array![0.5, 0.5],
            None,
        )
        .unwrap();
        assert_eq!(m.dim(), 2);
    }

    #[test]
    fn non_stochastic_row_reports_index() {
        let err = build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.2], [0.2, 0.8]]),
            Steps::Homogeneous(array![1.0, 1.0]),
            array![0.5, 0.5],
            None,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0"), "{msg}");
        assert!(msg.contains("1.1"), "{msg}");
    }

    #[test]
    fn non_positive_potential_rejected() {
        let err = build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(array![2.0, 0.0]),
            array![0.5, 0.5],
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("entry 1"));
    }

    #[test]
    fn lyapunov_below_one_rejected() {
        let err = build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(array![1.0, 1.0]),
            array![0.5, 0.5],
            Some(array![0.5, 2.0]),
        )
        .unwrap_err();
        assert!(err.to_string().contains("lyapunov"));
    }

    #[test]
    fn q_matrix_weights_rows_by_source_potential() {
        let m = two_state();
        let q = m.q_matrix(1).unwrap();
        assert_eq!(q, array![[1.8, 0.2], [0.2, 0.8]]);
    }

    #[test]
    fn random_models_are_reproducible() {
        let a = random_model(7, 10, 5);
        let b = random_model(7, 10, 5);
        assert_eq!(a.initial, b.initial);
        assert_eq!(a.transition(1).unwrap(), b.transition(1).unwrap());
    }
}
