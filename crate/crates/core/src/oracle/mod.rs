//! Exact, deterministic computation of Feynman-Kac objects on finite state
//! spaces: prediction filters and normalizing constants, semigroup matrices,
//! h-functions and twisted kernels, multiplicative-stability error profiles,
//! asymptotic CLT variances, the exact relative-variance expansion of the
//! normalizing-constant estimator, and exponential-moment ratios.
//!
//! Everything here is ground truth for the particle engine: dense arithmetic,
//! per-step renormalization, logs accumulated separately.

mod filter;
mod relvar;
mod spectral;
mod variance;

pub use filter::{exact_filter, semigroup_matrix, FkTrajectory};
pub use relvar::{exp_moment_ratio, relvar_expansion, ExpMomentReport, RelVarExpansion};
pub use spectral::{
    h_norms, spectral_objects, twisted_kernel, SpectralObjects, TwistedDriftSpec, TwistedKernel,
};
pub use variance::{
    asymptotic_variance, met_error_profile, vnorm_distance, DecayProfile,
};
