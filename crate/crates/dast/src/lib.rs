//! Identification of discrete-time SISO LTI systems from noisy linear
//! measurements.
//!
//! The central object is a dictionary of single-pole transfer functions
//! ("atoms") placed on a finite covering grid of the stability disk. An
//! unknown stable system is estimated by solving a weighted complex-l1
//! regularized least-squares problem over the dictionary coefficients —
//! a convex surrogate for penalizing the sum of Hankel singular values,
//! which in turn favors low McMillan degree.
//!
//! The crate is organized along the pipeline:
//!
//! * [`atoms`] — single-pole atoms, finite atomic models, H2 geometry;
//! * [`net`] — covering grids of the disk with constructive certificates;
//! * [`hankel`] — truncated Hankel matrices, singular values, nuclear norms;
//! * [`measure`] — linear measurement ensembles (frequency, impulse,
//!   convolution), noise injection, dictionary matrix assembly;
//! * [`solver`] — the regularized regression solver with duality-gap
//!   certificates and the noise-calibrated regularization rule;
//! * [`metrics`] — H2/H-infinity errors, empirical MSE, error-bound
//!   evaluators;
//! * [`baseline`] — time-domain simulation and a Ho-Kalman subspace
//!   identification comparator;
//! * [`experiment`] — reproducible experiment drivers with CSV/JSON
//!   records, also exposed through the `dast` command-line binary.
//!
//! Each major capability has a runnable example under `examples/`; see the
//! README for a tour.

pub mod atoms;
pub mod baseline;
pub mod experiment;
pub mod hankel;
pub mod measure;
pub mod metrics;
pub mod net;
pub mod solver;

pub use atoms::{AtomicModel, Pole};
pub use net::EpsilonNet;

use std::fmt;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidInput(String),
    /// A construction would exceed a configured size cap.
    SizeLimit(String),
    /// A numerical routine failed or produced an inconsistent result.
    Numerical(String),
    /// Experiment configuration could not be parsed or validated.
    Config(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::SizeLimit(msg) => write!(f, "size limit exceeded: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Config(msg) => write!(f, "invalid config: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
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

impl Error {
    /// Prefix an error with the pipeline stage it occurred in.
    pub(crate) fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::InvalidInput(m) => Error::InvalidInput(format!("[{stage}] {m}")),
            Error::SizeLimit(m) => Error::SizeLimit(format!("[{stage}] {m}")),
            Error::Numerical(m) => Error::Numerical(format!("[{stage}] {m}")),
            Error::Config(m) => Error::Config(format!("[{stage}] {m}")),
            Error::Io(e) => Error::Io(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
