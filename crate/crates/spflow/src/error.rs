//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpfError {
    /// A matrix required to be positive definite failed factorization.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    /// MAP Newton ascent failed to converge within the iteration cap.
    #[error("MAP search diverged after {iterations} iterations")]
    MapSearchDiverged { iterations: usize },

    /// Precision parameter outside (0, 1/2).
    #[error("invalid precision epsilon={0}; must lie in (0, 0.5)")]
    InvalidPrecision(f64),

    /// Every weight underflowed to zero; the filter has diverged.
    #[error("all weights are zero: {0}")]
    AllWeightsZero(&'static str),

    /// Association enumeration would exceed the configured cap.
    #[error("association enumeration over {targets} targets and {measurements} measurements exceeds cap")]
    CombinatorialLimit { targets: usize, measurements: usize },

    /// Vehicles overlap: a net gap became non-positive.
    #[error("degenerate gap s_{vehicle} = {gap} <= 0")]
    DegenerateGap { vehicle: usize, gap: f64 },

    /// A log-space sum underflowed everywhere.
    #[error("underflow: {0}")]
    Underflow(&'static str),

    /// Reference grid leaks probability mass over its boundary.
    #[error("grid too coarse: boundary mass {boundary_mass} exceeds 1e-4")]
    GridTooCoarse { boundary_mass: f64 },

    /// Densities were defined on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    /// Scenario configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, SpfError>;
