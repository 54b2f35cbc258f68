#![forbid(unsafe_code)]

//! Simulation and prediction laboratory for the spherical
//! Sherrington-Kirkpatrick model with an added Curie-Weiss (rank-one
//! ferromagnetic) coupling, operated in the scaling window around its
//! ferromagnetic transition.
//!
//! The pipeline goes: sample a disorder matrix ([`ensembles`]), diagonalize
//! it ([`spectral`]), evaluate the exact partition function by contour
//! integration and its asymptotic approximations ([`partition`]), compare
//! against the analytic limit laws ([`analytics`]), and repeat over many
//! trials with deterministic seeding ([`montecarlo`]).

pub mod analytics;
pub mod ensembles;
pub mod linalg;
pub mod matrix;
pub mod montecarlo;
pub mod partition;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spectral;

/// Errors shared across the numeric pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not symmetric: max |A - A^T| entry is {max_dev:.3e}")]
    NotSymmetric { max_dev: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },
    #[error("{0} is not supported")]
    Unsupported(&'static str),
    #[error(
        "bulk eigenvalue {value} (index {index}) is not below the spike location {edge}; \
         the sample violates rigidity"
    )]
    RigidityViolation { index: usize, value: f64, edge: f64 },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Error {
        Error::Domain(msg.into())
    }
}
