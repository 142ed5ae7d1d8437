use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("layer {layer}: width {width} minus filter size {k} is not divisible by stride {s}")]
    NonIntegralWidth { layer: usize, width: usize, k: usize, s: usize },
    #[error("layer {layer}: filter size {k} exceeds input width {width}")]
    NonPositiveWidth { layer: usize, width: usize, k: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("filter {layer} is zero")]
    ZeroFilter { layer: usize },
    #[error("polynomials live in different rings ({0} vs {1} variables)")]
    VarMismatch(usize, usize),
    #[error("cannot add homogeneous polynomials of degrees {0} and {1}")]
    DegreeMismatch(u32, u32),
    #[error("operation requires activation exponent r > 1")]
    RequiresRGreaterOne,
    #[error("degree formula produced a non-integer: {0}")]
    NonIntegralDegree(String),
    #[error("distance-degree formula produced a non-integer: {0}")]
    NonIntegralGed(String),
    #[error("distance-degree formulas disagree: {0} vs {1}")]
    FormulaMismatch(String, String),
    #[error("dense matrix with {entries} entries exceeds the limit of {limit}")]
    TooLarge { entries: usize, limit: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("Gram matrix of the design is numerically singular")]
    SingularGram,
    #[error("projection onto the convolutional subspace is ill-conditioned (condition {0:e})")]
    IllConditionedProjection(f64),
    #[error("shift is not admissible: {0}")]
    InadmissibleShift(String),
    #[error("parameter point is singular ({0})")]
    SingularPointRejected(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularGram | Error::IllConditionedProjection(_) => 4,
            Error::NonIntegralDegree(_) | Error::NonIntegralGed(_) | Error::FormulaMismatch(..) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
