//! Rigidity analysis for pinned bar-and-joint frameworks.
//!
//! A framework is a set of joints in the plane or in space, some of them
//! pinned, connected by rigid bars. The library answers two kinds of
//! questions about such a structure:
//!
//! - formal ones: does the rigidity matrix admit nonzero velocities, can a
//!   velocity be continued to higher-order derivative data, and at which
//!   level does a self-stress obstruct the continuation (see [`flex`]);
//! - empirical ones: along an actual motion of the structure, how fast do
//!   the bar elongations grow with arclength, and which flexibility claims
//!   does that growth rate witness (see [`path`] and [`order`]).
//!
//! The [`cusp`] module builds the connected double-Watt linkage, a finitely
//! flexible structure whose motion passes through a cusp: formal tests of
//! order three declare it rigid even though it demonstrably moves. Tracing
//! the motion and measuring elongation growth against arclength classifies
//! it correctly, which is the motivating example for the whole crate.
//!
//! All numerical rank and feasibility decisions go through the shared
//! tolerances in [`tol`], relative to a per-framework scale, so that the
//! same thresholds work for structures of different size.

pub mod cusp;
pub mod error;
pub mod fixtures;
pub mod flex;
pub mod framework;
pub mod linalg;
pub mod order;
pub mod path;

pub use error::RigidityError;
pub use flex::{
    classic_order_test, constraint_coefficient, extend_flex, first_order_flex_basis,
    stress_basis, verify_flex, FlexExtension, FlexSequence, OrderTestOptions, OrderTestVerdict,
    RigidCertificate,
};
pub use framework::{Configuration, Framework, FrameworkSpec, ValidationIssue, ValidationReport};
pub use order::{classify, fit_order, Classification, ElongationProfile, Measure, OrderEstimate};
pub use path::{
    arclength, polynomial_path, project_to_manifold, sample_polynomial, trace_mechanism,
    PathRecord, PathSamples,
};

/// Shared numeric thresholds.
///
/// Everything here is relative: rank cutoffs scale with the largest singular
/// value, feasibility and residual bounds scale with either the right-hand
/// side or the configuration scale `1 + ||X0||^2`. Keeping them in one place
/// makes the tolerance discipline auditable.
pub mod tol {
    /// Singular values below `RANK_REL * sigma_max` count as zero.
    pub const RANK_REL: f64 = 1e-10;
    /// A level right-hand side is solvable when every stress projection is
    /// below `FEASIBILITY_REL * ||b||`.
    pub const FEASIBILITY_REL: f64 = 1e-9;
    /// Residual contract for satisfied flex-extension levels.
    pub const LEVEL_RESIDUAL_REL: f64 = 1e-10;
    /// Flex verification bound on constraint coefficients, times the
    /// configuration scale.
    pub const VERIFY_REL: f64 = 1e-9;
    /// Projection onto the constraint set must reach this relative residual
    /// to count as converged.
    pub const PROJECTION_REL: f64 = 1e-12;
    /// Internal Gauss-Newton stopping target, kept well below the public
    /// projection bound so traced elongations sit under the noise floor.
    pub const PROJECTION_TARGET_REL: f64 = 1e-14;
    /// Traced samples keep every squared elongation below this, times scale.
    pub const TRACE_RESIDUAL_REL: f64 = 1e-10;
    /// Squared elongations below `NOISE_FLOOR_REL * scale` are treated as
    /// double-precision noise rather than signal.
    pub const NOISE_FLOOR_REL: f64 = 1e-13;
    /// A rigid-body motion that annihilates the rigidity matrix to this
    /// relative residual while vanishing at the pins means the pins are
    /// insufficient.
    pub const PIN_MOTION_REL: f64 = 1e-9;
    /// Ingested geometries with explicit lengths warn when the rest
    /// elongation exceeds this.
    pub const PRESTRESS_WARN: f64 = 1e-9;
    /// Fitted slopes must clear the claimed order by this margin to witness
    /// flexibility.
    pub const CLASSIFY_MARGIN: f64 = 0.1;
    /// Tracing requires the starting direction to lie in the flex space to
    /// this relative residual.
    pub const DIRECTION_REL: f64 = 1e-8;
    /// Projection basin bound: the worst squared elongation of the guess may
    /// not exceed this fraction of the smallest squared rest length.
    pub const BASIN_FACTOR: f64 = 1e-2;
}
