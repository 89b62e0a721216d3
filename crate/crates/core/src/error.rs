use thiserror::Error;

/// Errors raised by the numerical routines, priors, samplers and models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e}, threshold {threshold:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, threshold: f64 },

    #[error("matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error(
        "correlation matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})"
    )]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not orthogonal (max deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("overflow evaluating {0}")]
    Overflow(String),

    #[error("underflow evaluating {0}")]
    Underflow(String),

    #[error("need at least {min_chains} chains with {min_draws} draws each")]
    TooFewDraws { min_chains: usize, min_draws: usize },

    #[error("{divergent} of {total} post-warmup transitions diverged")]
    AllDivergent { divergent: usize, total: usize },

    #[error("gradient audit failed at coordinate {coordinate}: analytic {analytic:e}, finite difference {numeric:e}")]
    GradientAuditFailed {
        coordinate: usize,
        analytic: f64,
        numeric: f64,
    },

    #[error("log density is not finite on {finite} of {probes} initialization probes")]
    BadInitialization { finite: usize, probes: usize },

    #[error("chain contains no draws")]
    EmptyChain,

    #[error("network has no observed dyads")]
    NoObservedDyads,

    #[error("labels contain a single class")]
    SingleClass,

    #[error("csv: {0}")]
    Csv(String),

    #[error("ragged csv: row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("adjacency entry at ({row}, {col}) is not 0, 1 or NA: {value:?}")]
    NonBinary {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("adjacency is asymmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NotPsd { .. } => "NotPsd",
            Error::NotOrthogonal { .. } => "NotOrthogonal",
            Error::Domain(_) => "DomainError",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::Overflow(_) => "Overflow",
            Error::Underflow(_) => "Underflow",
            Error::TooFewDraws { .. } => "TooFewDraws",
            Error::AllDivergent { .. } => "AllDivergent",
            Error::GradientAuditFailed { .. } => "GradientAuditFailed",
            Error::BadInitialization { .. } => "BadInitialization",
            Error::EmptyChain => "EmptyChain",
            Error::NoObservedDyads => "NoObservedDyads",
            Error::SingleClass => "SingleClass",
            Error::Csv(_) => "Csv",
            Error::Ragged { .. } => "Ragged",
            Error::NonBinary { .. } => "NonBinary",
            Error::Asymmetric { .. } => "Asymmetric",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
