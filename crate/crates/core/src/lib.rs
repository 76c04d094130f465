//! Bootstrap particle filtering for Feynman-Kac models, together with the
//! exact machinery needed to test its stability properties.
//!
//! The crate has three layers:
//!
//! * model construction ([`model`]): finite-state Feynman-Kac models and a
//!   small zoo of continuous-state hidden Markov models (linear-Gaussian,
//!   ergodic-drift signals with binary / bounded-Gaussian / stochastic
//!   volatility observations, and random-walk signals);
//! * exact computation ([`oracle`], [`kalman`]): prediction filters,
//!   normalizing constants, h-functions, twisted kernels, asymptotic CLT
//!   variances and the exact relative-variance expansion, all evaluated with
//!   dense arithmetic on finite state spaces, plus a scalar Kalman filter as
//!   the continuous-state reference;
//! * verification ([`checker`], [`engine`], [`lab`]): numerical certification
//!   of multiplicative drift / minorization / majorization conditions, the
//!   particle filter itself, and the replicated experiments that compare the
//!   two against each other.
//!
//! Everything is deterministic given explicit seeds; see [`engine::RandomStream`].

pub mod checker;
pub mod engine;
pub mod error;
pub mod kalman;
pub mod lab;
pub mod model;
pub mod oracle;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};

/// Library version stamped into experiment artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
