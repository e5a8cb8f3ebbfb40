use thiserror::Error;

/// Errors raised by the numerical routines and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {z} lies within {tol:e} of a pole of the gamma function")]
    PoleProximity { z: String, tol: f64 },

    #[error("{what}: argument {value} outside the domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{what} did not converge within {terms} terms")]
    NonConvergence { what: &'static str, terms: usize },

    #[error("tail mismatch at T = {t}: quadrature {quadrature:e} vs asymptotic {asymptotic:e}")]
    TailMismatch {
        t: f64,
        quadrature: f64,
        asymptotic: f64,
    },

    #[error("energy {lambda} is within the band-edge guard (sin k = {sin_k:e})")]
    BandEdge { lambda: f64, sin_k: f64 },

    #[error("eigenvalue {eigenvalue} collides with jump point {jump}")]
    JumpCollision { jump: f64, eigenvalue: f64 },

    #[error("line symbol has different limits at -inf and +inf; the transported symbol would jump at mu = 1")]
    JumpAtInfinity,

    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),

    #[error("oversample factor {oversample} is below the aliasing threshold 4")]
    Aliasing { oversample: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
