use thiserror::Error;

/// Errors raised by the frame laboratory.
///
/// Hypothesis failures of a perturbation theorem are *not* errors; they are
/// reported through [`crate::perturbation::Verdict::HypothesisFails`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry in {context}")]
    NonFinite { context: String },

    #[error("invalid exponent {value}: must lie in [1, inf]")]
    InvalidExponent { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lambda2 cap: lambda2 = {lambda2} must be < 1")]
    Lambda2Cap { lambda2: f64 },

    #[error("not a frame: lower bound {lower} is zero")]
    NotAFrame { lower: f64 },

    #[error("not a Riesz basis: {reason}")]
    NotRieszBasis { reason: String },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("S is not a left inverse of the analysis operator (max deviation {deviation:e})")]
    NotLeftInverse { deviation: f64 },

    #[error("P is not a projection onto the range of the analysis operator: {reason}")]
    NotProjection { reason: String },

    #[error("reconstruction precondition fails (max deviation {deviation:e})")]
    ReconstructionFailed { deviation: f64 },

    #[error("hypothesis fails: {0}")]
    HypothesisFailed(String),

    #[error("side condition of {hypothesis} fails: {detail}")]
    SideCondition { hypothesis: String, detail: String },

    #[error("unsupported constant translation {from} -> {to}")]
    UnsupportedTranslation { from: String, to: String },

    #[error("oracle dimension {dim} exceeds the maximum {max}")]
    OracleDimension { dim: usize, max: usize },

    #[error("singular matrix in {context}")]
    Singular { context: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl FrameError {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, FrameError::Singular { .. } | FrameError::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, FrameError>;
