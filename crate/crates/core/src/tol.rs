//! Default numeric tolerances, tiered by how the compared quantities are
//! produced.
//!
//! The tiers are pinned once here so that library checks, task assertions,
//! and the test suites all agree on what "equal" means for each kind of
//! comparison.

/// Quantities whose derivatives are all Taylor-exact and compared after a
/// handful of floating-point operations.
pub const EXACT: f64 = 1e-12;

/// Quantities chained through two field constructions (for example a
/// connection built from an equation that is itself a composite evaluator).
pub const CHAINED: f64 = 1e-10;

/// Quantities that pass through a chart inversion, where the round-trip of
/// the user-supplied forward/inverse pair contributes its own error.
pub const CHART: f64 = 1e-9;

/// Comparisons against central finite differences.
pub const FINITE_DIFF: f64 = 1e-6;

/// Round-trip residual admitted when certifying a coordinate change.
pub const CHART_ROUNDTRIP: f64 = 1e-10;

/// Smallest |det| accepted for a chart Jacobian on its sample box.
pub const CHART_MIN_DET: f64 = 1e-12;

/// Max curvature norm below which the flatness criterion is reported as an
/// (inconclusive) pass.
pub const CURVATURE_FLAT: f64 = 1e-8;

/// Residual below which a frame/chart pair is accepted as adapted.
pub const ADAPTED_PAIR: f64 = 1e-8;

/// Remainder admitted by the quadratic-fit probe of an equation.
pub const QUADRATIC_PROBE: f64 = 1e-9;

/// Sampling tolerance for the holonomy check of a second-order connection.
pub const HOLONOMIC: f64 = 1e-12;
