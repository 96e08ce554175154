//! Covariant calculus of second-order dynamic equations in time-dependent
//! mechanics.
//!
//! A dynamic law a^i = xi^i(t, q, v) on positions over absolute time can be
//! rewritten relative to any reference frame (an observer family given by a
//! velocity field Gamma^i(t, q)) and transported between coordinate charts.
//! This crate provides the pieces of that calculus as evaluable, composable
//! objects:
//!
//! - exact first/second derivatives of user expressions by truncated Taylor
//!   arithmetic ([`ad`], [`expr`]);
//! - jet points and jet prolongations of coordinate changes ([`bundle`]);
//! - the equation/connection correspondence, torsion, curvature, and
//!   quadratic fits ([`connections`]);
//! - frame connections, relative velocities and accelerations, the
//!   Coriolis/centrifugal split, free-motion equations with their inertial
//!   forces, the flatness criterion, and Galilei charts ([`frames`]);
//! - fixed-step trajectories with covariant pushforward ([`integrator`]);
//! - a scenario-file driver with machine-readable reports ([`scenario`]).
//!
//! All values are immutable after construction and every operation is
//! re-entrant; sampled property checks can run across threads without
//! coordination.
//!
//! ```
//! use relmech::{
//!     relative_acceleration, DynamicEquation, Expression, JetPoint1, ReferenceFrame,
//! };
//!
//! // a free particle and the uniformly rotating observer family
//! let free = DynamicEquation::zero(2);
//! let rotating = ReferenceFrame::from_expressions(vec![
//!     Expression::parse("-q2", 2)?,
//!     Expression::parse("q1", 2)?,
//! ])?;
//!
//! // at q = (1, 0) with zero absolute velocity the observers measure the
//! // centripetal pull
//! let p = JetPoint1::new(0.0, vec![1.0, 0.0], vec![0.0, 0.0]);
//! let a = relative_acceleration(&free, &rotating, &p)?;
//! assert!((a[0] + 1.0).abs() < 1e-12 && a[1].abs() < 1e-12);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod ad;
pub mod bundle;
pub mod connections;
pub mod error;
pub mod expr;
mod field;
pub mod frames;
pub mod integrator;
pub mod sample;
pub mod scenario;
#[cfg(test)]
pub(crate) mod testutil;
pub mod tol;

pub use ad::{taylor2_eval, Scalar, Taylor2, Taylor2Scalar};
pub use bundle::{CoordinateChange, JetPoint1, JetPoint2};
pub use connections::{
    curvature, frame_jet_prolongation, gamma_from_xi, quadratic_coefficients, relative_velocity,
    torsion, vertical_covariant_differential, xi_from_gamma, CurvatureTensor, DynamicConnection,
    DynamicEquation, QuadraticCoefficients, ReferenceFrame, SecondOrderConnection, TorsionTensor,
};
pub use error::{ChartError, EvalError, ParseError, ScenarioError};
pub use expr::{Expression, VarRef};
pub use frames::{
    adapted_frame_residual, coriolis_decomposition, covariant_residual, frame_connection,
    frame_connection_components, free_motion_curvature_test, free_motion_equation, galilei_chart,
    geodesic_residual, relative_acceleration, tilde_gamma, transform_dynamic_equation, xi_frame,
    CoriolisReport, CurvatureVerdict, FrameConnectionComponents, FreeMotionCurvatureReport,
};
pub use integrator::{integrate, pushforward_trajectory, trajectory_residual, Trajectory};
pub use sample::SampleBox;
