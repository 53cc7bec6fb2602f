use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two matrices that must have identical shape do not.
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    /// A vector has the wrong length for the system it is used with.
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// A matrix entry is negative, NaN or infinite.
    #[error("invalid entry {value} at ({row}, {col}): entries must be finite and nonnegative")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    /// An impulse-response coefficient is negative, NaN or infinite.
    #[error("invalid coefficient {value} at index {index}: coefficients must be finite and nonnegative")]
    InvalidCoefficient { index: usize, value: f64 },

    /// The output data is identically zero, so normalization is undefined.
    #[error("output data is identically zero")]
    ZeroOutputMass,

    /// Every experiment has zero input at time 0 (`U_{0,j} = 0` for all j),
    /// so the trailing impulse-response coefficients are unidentifiable.
    #[error("all experiments have zero input at time 0")]
    ZeroInitialInputMass,

    /// A quantity that requires a finite I-divergence was requested at a
    /// point where the divergence is infinite (absolute continuity fails).
    #[error("I-divergence is infinite: output has mass where the model has none")]
    InfiniteDivergence,

    /// The exact deconvolution is undefined because the leading input
    /// coefficient `u_0` is zero.
    #[error("leading input coefficient u_0 is zero")]
    SingularLeadingInput,

    /// Some output entry is positive before any input arrives, so no finite
    /// approximant exists. Witnesses are `(time, experiment)` pairs with the
    /// experiment numbered from 1.
    #[error("no finite approximant exists; first violation at (time {}, experiment {})", .witnesses[0].0, .witnesses[0].1)]
    NotWellPosed { witnesses: Vec<(usize, usize)> },

    /// The instance exceeds the size the brute-force oracle is willing to
    /// grind through.
    #[error("instance too large for the brute-force oracle: {lags} lags x {experiments} experiments (limit {max_lags} x {max_experiments})")]
    InstanceTooLarge {
        lags: usize,
        experiments: usize,
        max_lags: usize,
        max_experiments: usize,
    },

    /// An operation that works on a single experiment column was given more.
    #[error("expected a single experiment column, found {found}")]
    ExpectedSingleColumn { found: usize },

    /// The objective is infinite at the requested starting point.
    #[error("objective is infinite at the initial point")]
    InfiniteInitialObjective,

    /// A configuration parameter is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
