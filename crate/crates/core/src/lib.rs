//! Sum-rate computations for the Gaussian vacationing-CEO problem.
//!
//! A remote Gaussian source `S` is observed through two noisy channels
//! `X_k = S + N_k`. Each of the two encoders sends two descriptions; side
//! receiver `l` sees description `l` from both encoders and the central
//! receiver sees all four. The crate provides:
//!
//! - [`gaussmodel`]: exact covariance algebra (conditioning, log-det mutual
//!   information) over the labelled joint law of `S, X, U, Y`.
//! - [`scheme`]: the Gaussian achievable scheme: closed-form distortions,
//!   marginal parameters, the sum-rate objective, explicit rate tuples and a
//!   multistart optimizer.
//! - [`bound`]: the converse: the `r_k` function, the parameter sets, the
//!   projection onto the boundary set and the full lower-bound search.
//! - [`equivalence`]: constructs a Gaussian scheme that meets the lower bound
//!   with equality and reports both sides of the identity.
//! - [`mc`]: an independent Monte-Carlo linear-MMSE oracle.
//!
//! All information quantities are in nats.

pub mod bound;
pub mod equivalence;
mod error;
pub mod gaussmodel;
mod linalg;
pub mod mc;
pub mod scheme;

pub use error::{Constraint, Error, Result};
pub use gaussmodel::{LabeledCov, SourceModel, Var};
pub use scheme::{DistortionTriple, SchemeParams};

/// Variance of a noise that is either finite or a symbolic limit at infinity.
///
/// Used for the auxiliary converse noise `Z_k`; the limit `+inf` is never
/// evaluated numerically.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum NoiseVar {
    Finite(f64),
    Infinite,
}

impl NoiseVar {
    pub fn finite(self) -> Option<f64> {
        match self {
            NoiseVar::Finite(v) => Some(v),
            NoiseVar::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, NoiseVar::Infinite)
    }
}

impl std::fmt::Display for NoiseVar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseVar::Finite(v) => write!(f, "{v}"),
            NoiseVar::Infinite => f.write_str("inf"),
        }
    }
}
