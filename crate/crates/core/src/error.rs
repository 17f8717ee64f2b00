use thiserror::Error;

use crate::rates::Beamformers;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("reactance matrix is not symmetric (max |X - X^T| = {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("impedance system is ill conditioned (rcond = {rcond:e})")]
    IllConditioned { rcond: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid MSE {0} (expected a value in (0, 1])")]
    InvalidMse(f64),

    /// The beamformer solver ran out of iterations. Carries the best iterate.
    #[error("beamformer solver did not converge (KKT residual {residual:e})")]
    SolverNotConverged {
        best: Box<Beamformers>,
        residual: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mismatched pairing: {0}")]
    Pairing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
