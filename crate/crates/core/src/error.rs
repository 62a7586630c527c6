//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("state outside Bloch ball: x^2+y^2+z^2 = {norm_sq}")]
    OutsideBall { norm_sq: f64 },

    #[error("matrix is not Hermitian within tolerance (max asymmetry {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix trace {trace} differs from 1 beyond tolerance")]
    BadTrace { trace: f64 },

    #[error("dt/tau = {ratio} exceeds the validity gate {max}")]
    StepTooCoarse { ratio: f64, max: f64 },

    #[error("time steps differ: {left} vs {right}")]
    MismatchedStep { left: f64, right: f64 },

    #[error("record too short: need at least {needed} samples, have {have}")]
    RecordTooShort { needed: usize, have: usize },

    #[error("record was generated without noise provenance (set keep_noise)")]
    MissingProvenance,

    #[error("classical spin emulator is only valid for tau_x == tau_z (got {tau_x} and {tau_z})")]
    UnequalTau { tau_x: f64, tau_z: f64 },

    #[error("readout grid spans {span_sigmas:.1} standard deviations, need at least {min_sigmas}")]
    GridTooNarrow { span_sigmas: f64, min_sigmas: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("filter time constant {tau_f} must exceed the sample step {dt}")]
    FilterTooFast { tau_f: f64, dt: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
