//! Model types: finite-state Feynman-Kac models and continuous-state HMMs.

mod config;
mod constraint;
mod finite;
mod hmm;

pub use config::ModelConfig;
pub use constraint::ObservationConstraint;
pub use finite::{random_model, FiniteModel, Steps};
pub use hmm::{
    build_ergodic_drift_model, build_linear_gaussian, build_random_walk_model, simulate_hmm,
    DriftFn, ErgodicDriftParams, HFn, HmmModel, LinearGaussianParams, ObsKind, ObsModel,
    RandomWalkParams, SigmaFn, SignalKernel,
};
