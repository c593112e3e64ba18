use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis dimension: need n_basis >= degree + 1, got n_basis = {n_basis}, degree = {degree}")]
    InvalidDimension { n_basis: usize, degree: usize },

    #[error("spline degree must be at least {min}, got {degree}")]
    UnsupportedDegree { degree: usize, min: usize },

    #[error("value {0} lies outside the unit domain [0, 1]")]
    OutOfDomain(f64),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid margin {0}: must be finite and non-negative")]
    InvalidMargin(f64),

    #[error("identifiability violated: pi0 + pi1 must exceed 1 (pi0 = {pi0}, pi1 = {pi1})")]
    Identifiability { pi0: f64, pi1: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("penalty weight must be non-negative, got {0}")]
    NegativeNu(f64),

    #[error("linear system is numerically singular even after ridge jitter {jitter:e}")]
    SingularSystem { jitter: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("every cross-validation fit failed")]
    AllFitsFailed,

    #[error("invalid interval [{s0}, {s1}]: need 0 <= s0 < s1 <= 1")]
    BadInterval { s0: f64, s1: f64 },

    #[error("ROC grids differ between the two summaries")]
    GridMismatch,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("unsupported data-generating process: {0}")]
    UnsupportedDgp(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("column not found: {0}")]
    ColumnMissing(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension { .. } => "invalid-dimension",
            Error::UnsupportedDegree { .. } => "unsupported-degree",
            Error::OutOfDomain(_) => "out-of-domain",
            Error::DegenerateData(_) => "degenerate-data",
            Error::InvalidMargin(_) => "invalid-margin",
            Error::Identifiability { .. } => "identifiability-violation",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::NegativeNu(_) => "negative-nu",
            Error::SingularSystem { .. } => "singular-system",
            Error::InsufficientData(_) => "insufficient-data",
            Error::AllFitsFailed => "all-fits-failed",
            Error::BadInterval { .. } => "bad-interval",
            Error::GridMismatch => "grid-mismatch",
            Error::EmptyInput(_) => "empty-input",
            Error::UnsupportedDgp(_) => "unsupported-dgp",
            Error::Parse { .. } => "parse-error",
            Error::ColumnMissing(_) => "column-missing",
            Error::MissingInput(_) => "missing-input",
            Error::Io(_) => "io-error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
