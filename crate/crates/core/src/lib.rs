//! Atomic diffraction by a standing light wave when the interaction time is
//! a Gamma-distributed random variable.
//!
//! * [`specfun`]: Bessel, log-gamma, ₄F₃, Gamma-weighted quadrature, Gamma sampling.
//! * [`randtime`]: the Gamma time law and the averaged density-matrix map it induces.
//! * [`diffraction`]: ideal and time-averaged momentum distributions.
//! * [`experiment`]: the time-uncertainty estimate from beam parameters.
//! * [`cli`]: configuration, runs and CSV/JSON output behind the `kdsim` binary.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout; constant tables
// keep the digits they were published with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod diffraction;
pub mod error;
pub mod experiment;
pub mod randtime;
pub mod specfun;

pub use error::{Error, Result};
