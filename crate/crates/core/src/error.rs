use thiserror::Error;

/// Errors produced by model construction, synthesis and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid quadcopter spec: {0}")]
    InvalidQuad(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("ray at angle {theta} rad does not intersect the payload boundary")]
    NoIntersection { theta: f64 },
    #[error("modules {i} and {j} are {distance:.4} m apart (minimum {d_min:.4} m)")]
    SeparationViolation {
        i: usize,
        j: usize,
        distance: f64,
        d_min: f64,
    },
    #[error("pitch {pitch} rad is at the Euler-angle singularity")]
    GimbalLock { pitch: f64 },
    #[error("wrench map is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficientWrenchMap { sigma_min: f64 },
    #[error("feedforward thrust leaves [{lower}, {upper}] N (min {min:.4}, max {max:.4})")]
    InfeasibleFeedforward {
        min: f64,
        max: f64,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Riccati equation has no stabilizing solution: {0}")]
    NotStabilizable(String),
    #[error("Riccati solution failed residual certification (relative residual {residual:e})")]
    IllConditioned { residual: f64 },
    #[error("closed-loop matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },
    #[error("bound {bound} lies outside the thrust box")]
    InfeasibleConstraint { bound: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no feasible layout found after {probes} probes")]
    NoFeasibleLayout { probes: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
