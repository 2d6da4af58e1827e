//! Thermodynamic formalism and multifractal analysis for piecewise-monotone
//! interval maps.
//!
//! The pipeline goes from an interval map and a potential, through the
//! dynamically defined cylinder partitions and a truncated Hofbauer extension,
//! to first-return inducing schemes, pressure functions, Gibbs/conformal
//! measure approximations, and finally dimension and Lyapunov spectra via
//! Legendre transform of the temperature function `T(q)`.
//!
//! Piecewise-linear full-branch maps (tent, two-slope Markov) admit closed-form
//! answers for every stage and serve as the built-in verification oracles; see
//! the `verify` module and the `verify-oracles` CLI subcommand.

pub mod cli;
pub mod config;
pub mod cylinders;
pub mod error;
pub mod hofbauer;
pub mod inducing;
pub mod map_model;
pub mod numerics;
pub mod spectra;
pub mod thermo;
pub mod verify;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
