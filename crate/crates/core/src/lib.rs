//! Spectral workbench for symmetrised Hankel operators.
//!
//! The crate computes absolutely continuous spectral bands of symmetrised
//! Hankel operators `M = P_- Xi P_+ + P_+ Xi^* P_-` with piecewise continuous
//! symbols, and of differences `theta(H) - theta(H0)` for a lattice
//! Schrodinger pair, and checks them against finite truncations.
//!
//! Modules:
//! * [`specfun`]: gamma, sine/cosine integrals, the `zeta` kernel, conical Legendre functions
//! * [`mehler`]: the Mehler operator, the Mehler-Fock transform and the kernels `w_tau`
//! * [`sho`]: symbols, truncations, band prediction and diagnostics
//! * [`scattering1d`]: lattice scattering matrices
//! * [`dtheta`]: `theta(H) - theta(H0)` on finite boxes
//! * [`cli`]: experiment configs, runs and manifests

pub mod cli;
pub mod dtheta;
pub mod error;
pub mod linalg;
pub mod mehler;
pub mod quadrature;
pub mod scattering1d;
pub mod sho;
pub mod specfun;

pub use error::{Error, Result};

/// Numerical a.c. threshold shared by the evolution experiments.
pub const AC_THRESHOLD: f64 = 1e-6;
