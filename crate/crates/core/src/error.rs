use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit reports.
///
/// [`Error::code`] gives the stable machine-greppable prefix used by the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },
    #[error("image points are collinear (rank {rank} < 3): calibration needs at least three non-collinear pixels")]
    RankDeficient { rank: usize },
    #[error("need at least {min} point pairs, got {got}")]
    TooFewPairs { got: usize, min: usize },
    #[error("homogeneous component is {w}, expected 1 (corrupt calibration)")]
    HomogeneousMismatch { w: f64 },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("empty evaluation set")]
    EmptyEvaluation,
    #[error("mask has {found} foreground pixels, need at least {min}")]
    TooFewPixels { found: usize, min: usize },
    #[error("foreground pixels have no spread along any axis")]
    DegenerateCloud,
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("insertion direction must be nonzero")]
    ZeroDirection,
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("segment lies outside the {width}x{height} image")]
    SegmentOutOfBounds { width: usize, height: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("could not draw rank-3 pixels in {attempts} attempts (degenerate pixel range)")]
    RankNotAchieved { attempts: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "E_DIMENSION",
            Error::NonFinite { .. } => "E_NON_FINITE",
            Error::SvdNoConvergence { .. } => "E_SVD_NO_CONVERGENCE",
            Error::RankDeficient { .. } => "E_RANK_DEFICIENT",
            Error::TooFewPairs { .. } => "E_TOO_FEW_PAIRS",
            Error::HomogeneousMismatch { .. } => "E_HOMOGENEOUS",
            Error::InvalidTransform(_) => "E_INVALID_TRANSFORM",
            Error::EmptyEvaluation => "E_EMPTY_EVALUATION",
            Error::TooFewPixels { .. } => "E_TOO_FEW_PIXELS",
            Error::DegenerateCloud => "E_DEGENERATE_CLOUD",
            Error::DegenerateSegment => "E_DEGENERATE_SEGMENT",
            Error::ZeroDirection => "E_ZERO_DIRECTION",
            Error::NonPositiveDepth(_) => "E_NONPOSITIVE_DEPTH",
            Error::InvalidIntrinsics(_) => "E_INVALID_INTRINSICS",
            Error::SegmentOutOfBounds { .. } => "E_OUT_OF_BOUNDS",
            Error::InvalidScenario(_) => "E_INVALID_SCENARIO",
            Error::RankNotAchieved { .. } => "E_RANK_NOT_ACHIEVED",
            Error::Parse { .. } => "E_PARSE",
            Error::Io(_) => "E_IO",
        }
    }

    /// True for failures of the numerics rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SvdNoConvergence { .. }
                | Error::RankDeficient { .. }
                | Error::HomogeneousMismatch { .. }
                | Error::DegenerateCloud
                | Error::RankNotAchieved { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
