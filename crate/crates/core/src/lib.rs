//! Convex Tikhonov regularization on finite-dimensional `l^r` spaces.
//!
//! The crate provides the pieces needed to set up, solve, and study
//! variational regularization problems of the form
//!
//! ```text
//!     min_x  (1/p) ||A x - y||^p + alpha R(x)
//! ```
//!
//! where the residual norm is an `l^r` norm on a finite-dimensional space and
//! `R` is a convex regularization functional:
//!
//! - [`banach`]: `l^r` space descriptions, duality mappings, norm-power
//!   Bregman distances, and sampled convexity probes.
//! - [`regfun`]: regularization functionals (norm powers, negative entropy),
//!   their convexity conjugates, subgradients, and Bregman distances.
//! - [`linop`]: dense / diagonal / convolution operators, adjoints, source
//!   problem construction, calibrated noise, and a range diagnostic.
//! - [`solver`]: a first-order primal solver with dual-variable recovery,
//!   KKT residuals, and the dual objective used for optimality checks.
//! - [`rates`]: index functions, conjugate error bounds, a-priori parameter
//!   choice, log-log slope fits, and a variational-inequality probe.
//! - [`experiment`]: config-driven rate experiments with deterministic
//!   seeding and CSV/JSON emission; backs the command-line interface.

pub mod banach;
pub mod experiment;
pub mod linop;
pub mod rates;
pub mod regfun;
pub mod solver;

pub(crate) mod rng;

/// Column vector of `f64` coordinates; all public operations validate
/// dimensions and finiteness at entry.
pub type Vector = nalgebra::DVector<f64>;

/// Dense matrix of `f64` entries.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Errors shared by all modules of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid exponent {value}: {reason}")]
    InvalidExponent { value: f64, reason: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty sample: at least one sample is required")]
    EmptySample,

    #[error("subgradient check failed: Fenchel-Young gap {gap:.3e} exceeds tolerance {tol:.3e}")]
    NotASubgradient { gap: f64, tol: f64 },

    #[error("no subgradient exists at this point: {reason}")]
    NoSubgradient { reason: &'static str },

    #[error("source condition violated: {0}")]
    SourceCondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Absolute/relative tolerance pair used by verification checks.
///
/// A deviation `err` measured against a magnitude `scale` is accepted when
/// `err <= abs + rel * scale`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-10, rel: 1e-8 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    /// True when `err` is acceptable relative to `scale`.
    pub fn accepts(&self, err: f64, scale: f64) -> bool {
        err <= self.abs + self.rel * scale.abs()
    }
}

pub(crate) fn check_finite(v: &Vector, context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

pub(crate) fn check_dim(v: &Vector, expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got: v.len() })
    }
}
