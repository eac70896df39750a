use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid period {value} on axis {axis}: periods must be positive and finite")]
    InvalidPeriod { axis: usize, value: f64 },

    #[error("unsupported dimension {0}: only n = 2 and n = 3 are implemented")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "operator is not strongly elliptic (sampled min |Re principal symbol| = {min_abs:.3e})"
    )]
    NotElliptic { min_abs: f64 },

    #[error("frequency zero set not certified complete within radius {radius}")]
    UncertifiedZeroSet { radius: usize },

    #[error("truncation tail {tail:.3e} exceeds tolerance {tolerance:.3e}; {suggestion}")]
    TruncationTooLarge {
        tail: f64,
        tolerance: f64,
        suggestion: String,
    },

    #[error("domain does not satisfy cl(Omega) inside the open cell Q: {0}")]
    DomainOutsideCell(String),

    #[error("quadrature resolution {got} below minimum {min}")]
    ResolutionTooSmall { got: usize, min: usize },

    #[error("singular centre is farther than one cell from the domain; fold it first")]
    FarSingularCenter,

    #[error("evaluation point folds into cl(Omega) but the rule is centred at {expected:?}, not at {got:?}")]
    SingularCenterMismatch { expected: Vec<f64>, got: Vec<f64> },

    #[error("evaluation point lies on the domain boundary")]
    PointOnBoundary,

    #[error("kernel `{0}` is not differentiable (not of class A1)")]
    NotDifferentiable(String),

    #[error("derivative order {0} not supported (maximum 3)")]
    UnsupportedOrder(usize),

    #[error("boundary node {node} at {position:?} violates the kernel window margin (distance {distance:.3e} < {margin:.3e})")]
    MarginViolation {
        node: usize,
        position: Vec<f64>,
        distance: f64,
        margin: f64,
    },

    #[error("kernel argument out of supported range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
