use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Structural condition on an operator/boundary pair that failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("ellipticity violated: smallest eigenvalue {min_eigenvalue} of the principal coefficient matrix at node {node} is not positive")]
    NotElliptic { node: usize, min_eigenvalue: f64 },
    #[error("zeroth-order coefficient must be nonnegative: a0 = {value} at node {node}")]
    NegativeZerothOrder { node: usize, value: f64 },
    #[error("Neumann boundary operator requires a zeroth-order coefficient that is not identically zero")]
    NeumannWithoutAbsorption,
    #[error("Robin boundary coefficient must be nonnegative: b = {value} at boundary node {node}")]
    NegativeRobinCoefficient { node: usize, value: f64 },
    #[error("Robin boundary coefficient must not vanish identically on the boundary")]
    RobinCoefficientVanishes,
    #[error("Robin boundary operator requires a coefficient expression `b`")]
    MissingRobinCoefficient,
    #[error("disk operators must have the form -c*Laplacian + a0(x) with constant c > 0: {0}")]
    UnsupportedOnDisk(String),
    #[error("mixed-derivative coefficient {a12} at node {node} is too large for a nonnegative stencil on this grid")]
    MixedDerivativeTooLarge { node: usize, a12: f64 },
    #[error("boundary data zeta must be nonnegative: zeta = {value} at boundary node {node}")]
    NegativeBoundaryData { node: usize, value: f64 },
    #[error("{name} must be nonnegative, got {value}")]
    NegativeParameter { name: String, value: f64 },
    #[error("rho must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("h must be nonnegative on the box, got {value} on a sampled state")]
    NegativeFunctional { value: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("point ({0}, {1}) lies outside the closed domain")]
    OutsideDomain(f64, f64),
    #[error("parse error in `{source_text}`: {error}")]
    Parse {
        source_text: String,
        error: ParseError,
    },
    #[error("evaluation error: {0}")]
    Eval(#[from] EvalError),
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("singular system: zero pivot at row {row}")]
    Singular { row: usize },
    #[error("linear solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },
    #[error("power iteration did not converge: eigen-residual {residual:e} after {iterations} iterations")]
    EigenNonConvergence { iterations: usize, residual: f64 },
    #[error("non-finite value in component {component} at iteration {iteration}")]
    NonFinite { component: usize, iteration: usize },
    #[error("{path}: {source}")]
    Field {
        path: String,
        #[source]
        source: Box<Error>,
    },
    #[error("component {component}: {source}")]
    Component {
        component: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_component(self, component: usize) -> Self {
        match self {
            e @ Error::Component { .. } => e,
            e => Error::Component {
                component,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn at(self, path: impl Into<String>) -> Self {
        Error::Field {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// Short stable identifier used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::OutsideDomain(..) => "domain",
            Error::Parse { .. } => "parse",
            Error::Eval(_) => "eval",
            Error::Validation(_) => "validation",
            Error::Schema { .. } => "schema",
            Error::Singular { .. } => "singular",
            Error::LinearSolve { .. } => "linear-solve",
            Error::EigenNonConvergence { .. } => "eigen-nonconvergence",
            Error::NonFinite { .. } => "non-finite",
            Error::Component { source, .. } | Error::Field { source, .. } => source.kind(),
        }
    }
}
