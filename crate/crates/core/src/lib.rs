//! Second moments and two-point correlations of the stochastic heat equation
//! `du = (nu/2) u'' dt + rho(u) W(dt, dx)` with measure-valued initial data,
//! the joint law of Brownian motion and its local time, and Monte Carlo
//! estimators that cross-check the closed forms.

pub mod error;
pub mod gaussian;
pub mod kernels;
pub mod local_time;
pub mod measure;
pub mod quadrature;
pub mod simulate;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use gaussian::{erfcx, exp_phi, heat_kernel, normal_cdf, KernelParams};
pub use kernels::{
    kernel_k, kernel_k_dagger, kernel_k_star, kernel_k_star_inner, mgf_local_time, two_point_delta, two_point_lebesgue,
    MomentBoundParams, TwoPointQuery,
};
pub use local_time::JointLocalTimeLaw;
pub use measure::{Density, GrowthCertificate, InitialMeasure, MeasureSpec};
pub use quadrature::Integrator;
pub use simulate::{Estimate, McConfig, SimOutcome};

/// Library version string embedded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
