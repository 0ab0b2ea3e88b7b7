//! Fluctuations of spectral statistics of time-dependent Wigner matrices and
//! their principal submatrices.

pub mod cli;
pub mod config;
pub mod entry_process;
pub mod error;
pub mod kernel;
pub mod montecarlo;
pub mod observables;
pub mod seed;
pub mod selftest;
pub mod theory;
pub mod wigner;

pub use error::{Error, Result};
