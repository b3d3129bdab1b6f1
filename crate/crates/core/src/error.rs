use serde::Serialize;
use thiserror::Error;

/// Domain errors raised by the kinematic and planning routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid joint vector: leg lengths must be strictly positive")]
    InvalidJoint,
    #[error("leg {leg} has zero length, its direction is undefined")]
    DegenerateLeg { leg: usize },
    #[error("elimination of the platform orientation is identically singular")]
    EliminationSingular,
    #[error("two same-aspect assembly modes share theta1 at ({rho2}, {rho3})")]
    DegenerateCoordinate { rho2: f64, rho3: f64 },
    #[error("no singular contour available to seed the cusp search")]
    SeedFailure,
    #[error("point ({x}, {y}) lies within the boundary tolerance of the loop")]
    OnBoundary { x: f64, y: f64 },
    #[error("start pose is not an assembly mode of the first trajectory point (residual {residual:e})")]
    StartInconsistent { residual: f64 },
    #[error("corrector diverged at arc parameter {s} without a fold certificate")]
    CorrectorDiverged { s: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("modes {from} and {to} are not connected at margin {margin}")]
    NoPath { from: usize, to: usize, margin: f64 },
    #[error("graph path found but continuation disagrees: {0}")]
    ValidationFailed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl Error {
    /// Stable machine-readable code used in JSON diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "INVALID_GEOMETRY",
            Error::InvalidJoint => "INVALID_JOINT",
            Error::DegenerateLeg { .. } => "DEGENERATE_LEG",
            Error::EliminationSingular => "ELIMINATION_SINGULAR",
            Error::DegenerateCoordinate { .. } => "DEGENERATE_COORDINATE",
            Error::SeedFailure => "SEED_FAILURE",
            Error::OnBoundary { .. } => "ON_BOUNDARY",
            Error::StartInconsistent { .. } => "START_INCONSISTENT",
            Error::CorrectorDiverged { .. } => "CORRECTOR_DIVERGED",
            Error::InvalidTrajectory(_) => "INVALID_TRAJECTORY",
            Error::NoPath { .. } => "NO_PATH",
            Error::ValidationFailed(_) => "VALIDATION_FAILED",
            Error::InvalidRequest(_) => "INVALID_REQUEST",
        }
    }

    pub fn diagnostic(&self) -> Diagnostic {
        Diagnostic {
            schema: "cusp-atlas/v1",
            error: self.code(),
            message: self.to_string(),
        }
    }
}

/// JSON body emitted for domain errors.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub schema: &'static str,
    pub error: &'static str,
    pub message: String,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
