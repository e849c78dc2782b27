//! Error type shared by the analysis operations.
//!
//! Framework validation has its own richer report type in [`crate::framework`];
//! this enum covers everything that can go wrong after a framework exists.

use thiserror::Error;

/// Failures of analysis operations on an already validated framework.
#[derive(Debug, Error)]
pub enum RigidityError {
    /// A vector had the wrong length for the framework it was used with.
    #[error("dimension mismatch: expected {expected} free coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A Taylor level outside the supported range was requested.
    #[error("level k={k} out of range (1..={max})")]
    LevelOutOfRange { k: usize, max: usize },

    /// The classic order test was asked for order zero.
    #[error("order must be at least 1, got {n}")]
    OrderOutOfRange { n: usize },

    /// A flex sequence violated its structural invariants.
    #[error("invalid flex sequence: {reason}")]
    InvalidFlex { reason: String },

    /// A caller-supplied argument was unusable.
    #[error("invalid argument: {what}")]
    InvalidArgument { what: String },

    /// Lower levels of a flex were not satisfied before extension.
    #[error("level {level} residual {residual:.3e} exceeds the extension precondition {bound:.3e}")]
    PreconditionViolated {
        level: usize,
        residual: f64,
        bound: f64,
    },

    /// The projection guess started outside the trust basin.
    #[error("guess is outside the projection basin: worst elongation {residual:.3e} > {bound:.3e}")]
    OutsideBasin { residual: f64, bound: f64 },

    /// Gauss-Newton projection failed to reach the residual contract.
    #[error("projection did not converge within {iterations} iterations (residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    /// A trace was started along a direction that is not a flex.
    #[error("direction is not in the first-order flex space (relative residual {residual:.3e})")]
    DirectionNotFlex { residual: f64 },

    /// A trace or path operation needs a flexible framework.
    #[error("no flex direction: the first-order flex space is empty")]
    NoFlexDirection,

    /// Too few samples for the requested path computation.
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// An elongation profile was empty or collapsed to a single point.
    #[error("elongation profile is degenerate: {reason}")]
    DegenerateProfile { reason: String },

    /// The log-log fit had no spread in arclength.
    #[error("degenerate fit: zero variance in log arclength")]
    DegenerateFit,

    /// A flex extension hit a stress obstruction at the given level.
    #[error("level {level} is obstructed: stress projection magnitude {magnitude:.6e}")]
    ObstructedLevel { level: usize, magnitude: f64 },

    /// The cusp construction requires a negative leading coefficient.
    #[error("requires a < 0: the connecting bar must drop, got a = {a}")]
    RequiresNegativeA { a: f64 },

    /// A staged computation failed; the stage name says where.
    #[error("stage {stage}: {message}")]
    Stage { stage: String, message: String },
}
