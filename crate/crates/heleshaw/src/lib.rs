//! Numerical potential theory for Hele-Shaw bubble growth.
//!
//! The crate computes ordinary and generalized Newtonian potentials of
//! characteristic functions of bounded and unbounded domains, certifies the
//! quadratic-internal-potential / null-quadrature property, and constructs
//! and verifies global solutions of the bubble-growth moving-boundary
//! problem (pressure harmonic in the exterior, zero in the bubble, kinematic
//! boundary condition, sub-cubic growth at infinity).
//!
//! Modules mirror the layers of the computation:
//!
//! - [`kernel`]: the fundamental solution `J` and its closed-form partial
//!   derivatives up to order four, plus decay constants for truncation
//!   control.
//! - [`domains`]: canonical domain families (ellipsoids, half-spaces, strips,
//!   paraboloids, cylinders) with membership, boundary sampling, normals and
//!   volume queries.
//! - [`quadrature`]: adaptive multi-dimensional integration over those
//!   domains with singularity handling, ball excision and truncation of
//!   unbounded regions under explicit tail bounds.
//! - [`potential`]: potential evaluation, third-derivative operators for
//!   unbounded supports, closed-form ellipsoid coefficients, the weighted
//!   measure norm, and decay-estimate checks.
//! - [`nullquad`]: classification and certification of quadratic-potential /
//!   null-quadrature domains.
//! - [`evolution`]: global solution families (growing ellipsoids, cylinders,
//!   translating paraboloids), pressure construction, and residual
//!   verification of the moving-boundary system and moment identities.

pub mod bump;
pub mod domains;
pub mod evolution;
pub mod kernel;
mod linalg;
pub mod nullquad;
pub mod potential;
pub mod quadrature;

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("kernel evaluated at its singular point x = 0")]
    SingularPoint,
    #[error("derivative order {order} unsupported (maximum 4)")]
    UnsupportedOrder { order: usize },
    #[error("truncation radius {radius} invalid; requires radius > {min}")]
    InvalidTruncationRadius { radius: f64, min: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("unbounded boundary requires an extent")]
    MissingExtent,
    #[error("point is not on the domain boundary")]
    NotOnBoundary,
    #[error("point is not interior to the domain")]
    NotInterior,
    #[error("operation undefined on the boundary (principal-value ambiguity)")]
    OnBoundary,
    #[error("quadrature budget exhausted: best value {value} with error estimate {error_estimate}")]
    NonConvergence { value: f64, error_estimate: f64 },
    #[error("time step leaves the family range [0, {t_max}]")]
    StepOutOfRange { t_max: f64 },
    #[error("extent too small: tail bound {tail_bound} exceeds tolerance {tolerance}")]
    ExtentTooSmall { tail_bound: f64, tolerance: f64 },
    #[error("operation unsupported for this family kind: {0}")]
    UnsupportedFamily(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
