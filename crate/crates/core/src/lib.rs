//! Linear response of chaotic systems by space-split sensitivity (S3).
//!
//! * [`models`]: benchmark systems and their derivative contractions
//! * [`stepping`]: the one-step map and its contractions
//! * [`tangent`]: QR iteration, Lyapunov exponents, regularized tangents
//! * [`srb`]: SRB density gradient and Lyapunov-basis derivatives
//! * [`response`]: the full and reduced S3 pipelines
//! * [`harness`]: sweeps, ensembles, finite-difference references, CSV and CLI

pub mod error;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod response;
pub mod srb;
pub mod stepping;
pub mod tangent;

pub use error::{Error, Result};
