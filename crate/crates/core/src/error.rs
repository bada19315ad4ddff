use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("no endemic equilibrium (R0 = {r0:.6} <= 1)")]
    NoEndemicEquilibrium { r0: f64 },

    #[error("mode {n} is stable for all delays (no imaginary-axis crossing)")]
    ModeStableForAllDelays { n: usize },

    #[error("first Hopf point is a tie between modes {modes:?} (candidate double Hopf)")]
    DoubleHopf { modes: Vec<usize> },

    #[error("degenerate pairing: (Phi*, Phi) is singular")]
    DegeneratePairing,

    #[error("resonant correction: center-manifold system for mode {n} is singular")]
    ResonantCorrection { n: usize },

    #[error("segment domains differ: {left} vs {right}")]
    SegmentDomainMismatch { left: f64, right: f64 },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("time step {dt} exceeds the stability bound {bound} of the {scheme} scheme")]
    StepTooLarge {
        dt: f64,
        bound: f64,
        scheme: &'static str,
    },

    #[error("integration failed at t = {t}: {reason}")]
    Numeric { t: f64, reason: String },

    #[error("mode count {n_max} is too large for a grid of {grid_points} points (limit N/4)")]
    Aliasing { n_max: usize, grid_points: usize },

    #[error("trajectory is empty or too short for analysis")]
    EmptyTrajectory,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse failure category, used by the command line front end to pick
    /// an exit status.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParams(_)
            | Error::Config { .. }
            | Error::SegmentDomainMismatch { .. }
            | Error::Aliasing { .. } => ErrorCategory::Usage,
            Error::NoEndemicEquilibrium { .. }
            | Error::ModeStableForAllDelays { .. }
            | Error::DoubleHopf { .. } => ErrorCategory::Precondition,
            Error::DegeneratePairing
            | Error::ResonantCorrection { .. }
            | Error::StepTooLarge { .. }
            | Error::Numeric { .. }
            | Error::EmptyTrajectory => ErrorCategory::Numeric,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorCategory::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Precondition,
    Numeric,
    Io,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
