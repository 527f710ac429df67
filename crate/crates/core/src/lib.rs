//! Simulation toolkit for imperfect photonic BB84 receivers.
//!
//! The crate models receivers in Fock space, computes the subspace of
//! channel states that can influence a receiver (its reversed space),
//! synthesizes and verifies zero-error eavesdropping isometries, runs
//! Monte-Carlo BB84 sessions over pluggable channels, fuzzes black-box
//! detector models, and classifies attacks by the Hilbert spaces they touch.

pub mod attacks;
pub mod classify;
pub mod error;
pub mod fockspace;
pub mod fuzz;
pub mod linalg;
pub mod protocol;
pub mod receivers;
pub mod tolerance;

pub use error::{Error, Result};

/// Complex amplitude type used throughout the crate.
pub type C64 = num_complex::Complex64;
