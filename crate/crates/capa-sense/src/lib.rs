//! Near-field sensing with continuous-aperture arrays (CAPAs).
//!
//! A monostatic base station probes `N` point targets with a continuous
//! source current `J(p)` on a transmit aperture and observes the scattered
//! field `y(q)` on a receive aperture. This crate provides the full chain
//! needed to design and evaluate that probing current:
//!
//! - [`geometry`] — apertures, targets, physical constants, scenario assembly;
//! - [`quadrature`] — Gauss–Legendre rules and tensor-product 2D integration;
//! - [`channel`] — scalar Green's-function responses, their position
//!   gradients, the round-trip channel, field synthesis, and noise sampling;
//! - [`fisher`] — cross-integral matrices, Fisher information in blockwise-trace
//!   form, and the trace-of-CRB objective `F(w)` with its analytic gradient;
//! - [`estimator`] — concentrated-likelihood spectra, reflection-coefficient
//!   recovery, and grid-search positioning;
//! - [`optimizer`] — Riemannian conjugate gradient on the power ellipsoid
//!   `{w : wᴴB₀w = P}` with Armijo backtracking (SMGD);
//! - [`baselines`] — random-phase probing, a half-wavelength discrete array
//!   (SPDA) reference, and beam-pattern diagnostics;
//! - [`experiments`] — reproducible experiment runners behind the CLI.

use std::fmt;

pub mod baselines;
pub mod channel;
pub mod config;
pub mod estimator;
pub mod experiments;
pub mod fisher;
pub mod geometry;
pub mod optimizer;
pub mod quadrature;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A constructor or operation received an invalid argument.
    InvalidArgument(String),
    /// Aperture/target geometry violates a structural invariant.
    Geometry(String),
    /// Two points required to be distinct coincide (distance below 1e-9 m).
    Singularity { distance: f64 },
    /// An integrand evaluated to a non-finite value at a quadrature point.
    NonFinite { x: f64, y: f64 },
    /// The Fisher information cannot resolve the requested parameters.
    Unidentifiable(String),
    /// A Gram or normal-equation matrix is singular or near-singular.
    SingularMatrix(String),
    /// Configuration file could not be parsed or is inconsistent.
    Config(String),
    /// Filesystem error while reading configs or writing results.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Geometry(msg) => write!(f, "geometry error: {msg}"),
            Error::Singularity { distance } => {
                write!(f, "singular kernel evaluation: distance {distance:.3e} m")
            }
            Error::NonFinite { x, y } => {
                write!(f, "non-finite integrand at quadrature point ({x}, {y})")
            }
            Error::Unidentifiable(msg) => write!(f, "unidentifiable configuration: {msg}"),
            Error::SingularMatrix(msg) => write!(f, "singular matrix: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
