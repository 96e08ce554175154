//! Error types shared across the crate.

use thiserror::Error;

/// Failure while evaluating an expression or a derived field at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{expr}`")]
    DivisionByZero { expr: String },
    #[error("log of non-positive value in `{expr}`")]
    LogDomain { expr: String },
    #[error("square root of negative value in `{expr}`")]
    SqrtDomain { expr: String },
    #[error("power with non-positive base and non-integer exponent in `{expr}`")]
    PowDomain { expr: String },
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },
    /// Derivatives of composite fields are carried through a finite tower of
    /// nested Taylor levels; requests beyond the supported depth fail loudly
    /// instead of returning silently truncated derivatives.
    #[error("derivative nesting exceeds the supported depth")]
    NestingTooDeep,
    #[error("equation is not quadratic in the velocities: {detail}")]
    NotQuadratic { detail: String },
    #[error("frame and chart are not an adapted pair (max residual {residual:.3e})")]
    InconsistentFrameChart { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Syntax or name-resolution error in the expression mini-language.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Failure to certify a coordinate change on its sample box.
#[derive(Debug, Error)]
pub enum ChartError {
    #[error("forward and inverse do not compose to the identity (residual {residual:.3e} at sample {index})")]
    RoundTrip { index: usize, residual: f64 },
    #[error("Jacobian is numerically singular (|det| = {det:.3e} at sample {index})")]
    SingularJacobian { index: usize, det: f64 },
    #[error("matrix is singular (|det| = {det:.3e})")]
    SingularMatrix { det: f64 },
    #[error("chart components must not depend on velocities ({which})")]
    VelocityDependence { which: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Scenario-file loading, validation, or execution error.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("task `{task}`: undefined {kind} `{name}`")]
    Undefined {
        kind: &'static str,
        name: String,
        task: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{task}: {source}")]
    TaskEval {
        task: String,
        #[source]
        source: EvalError,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    /// Process exit code for the CLI: 2 for definition problems, 3 for
    /// evaluation or i/o failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse { .. }
            | ScenarioError::Undefined { .. }
            | ScenarioError::Invalid(_)
            | ScenarioError::Chart(_) => 2,
            ScenarioError::Eval(_) | ScenarioError::TaskEval { .. } | ScenarioError::Io(_) => 3,
        }
    }
}
