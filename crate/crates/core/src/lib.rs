//! Consensus dichotomy of recurrent inequalities `x(k+1) <= W(k) x(k)` with
//! stochastic `W(k)`.
//!
//! The crate has four layers:
//!
//! * [`matrix`] and [`sequence`]: stochastic, substochastic and signed
//!   matrices, and deterministic generators of `W(k)`;
//! * [`graph`]: threshold graphs, strong components, periods, primitivity
//!   and the `S_eps` predicate;
//! * [`checks`]: executable versions of the static and time-varying
//!   dichotomy criteria and the contraction bounds behind them;
//! * [`protocols`] and [`projection`]: trajectory generators (averaging,
//!   inequality, signed networks, Friedkin-Johnsen, projected consensus);
//!
//! plus [`scenario`], the batch front-end used by the CLI.

pub mod checks;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod projection;
pub mod protocols;
pub mod scenario;
pub mod sequence;

pub use error::{Error, Result};
pub use matrix::{SignedInfluenceMatrix, StochasticMatrix, SubstochasticMatrix};
pub use sequence::{MatrixSequence, SignedSequence};

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
