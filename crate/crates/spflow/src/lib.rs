//! Stochastic-particle-flow Bayesian filtering toolkit.
//!
//! Moves weighted particle clouds from prior to posterior by integrating a
//! Langevin diffusion in pseudo-time, articulated either as a Gaussian sum
//! filter ([`spf_gs`]) or as a marginal particle filter ([`spf_mpf`]).
//! Ships with classic baselines (EKF/UKF, bootstrap and marginal particle
//! filters), benchmark scenarios from univariate toys to multi-sensor
//! bearings-only and convoy tracking, and a Monte Carlo experiment runner
//! with density-quality metrics.
//!
//! The numerical core is generic over the floating-point type through the
//! [`Real`] trait; the aliases below pin the `f64` instantiation used by the
//! experiment layer.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod flow;
pub mod linalg;
pub mod model;
pub mod models;
pub mod scalar;
pub mod scenario;
pub mod spf_gs;
pub mod spf_mpf;
pub mod stream;

pub use error::{Result, SpfError};
pub use scalar::Real;

/// Concrete scalar used by the experiment layer.
pub type F = f64;
/// Dynamic vector over [`F`].
pub type Vector = nalgebra::DVector<F>;
/// Dynamic matrix over [`F`].
pub type Matrix = nalgebra::DMatrix<F>;
/// Symmetric matrix over [`F`].
pub type Sym = linalg::SymMatrix<F>;
