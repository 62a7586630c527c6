//! Monte Carlo simulator for a qubit under simultaneous continuous weak
//! measurement of the two non-commuting observables sigma_x and sigma_z,
//! together with the analysis stack built on the recorded readouts:
//! correlation functions, macrorealism (Leggett-Garg) tests, model-free
//! state tracking, and a classical spin emulator that reproduces the same
//! statistics.
//!
//! Layout:
//! - [`bloch`]: qubit state types and invariant checks
//! - [`noise`]: reproducible per-channel Gaussian noise streams
//! - [`kernel`]: discrete Gaussian measurement primitive (Kraus update)
//! - [`trajectory`]: trajectory propagators and ensemble driver
//! - [`stats`]: correlator estimation with batch-means errors
//! - [`lg`]: rotated readouts and Leggett-Garg inequalities
//! - [`emulator`]: epistemically restricted classical spin model
//! - [`filter`]: exponentially weighted moving-average tracking
//! - [`experiments`]: named end-to-end experiments with assertions

pub mod bloch;
pub mod emulator;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod io;
pub mod kernel;
pub mod lg;
pub mod noise;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
