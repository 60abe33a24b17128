use thiserror::Error;

/// Errors raised across the crate. Variants carry enough context to be
/// printed as diagnostics by the command-line front end.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("zero conditioning mass at cell {cell:?}")]
    ZeroConditioningMass { cell: Vec<usize> },

    #[error("laws are defined on different supports")]
    SupportMismatch,

    #[error("absolute continuity violated at flat cell {cell}")]
    AbsoluteContinuityViolation { cell: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset row {row} lies outside the support")]
    RowOutsideSupport { row: usize },

    #[error("no solution in stratum {stratum}: residual {residual:e}")]
    NoSolution { stratum: usize, residual: f64 },

    #[error("positivity violated at cell {cell:?}")]
    PositivityViolation { cell: Vec<usize> },

    #[error("functional does not fit support: {0}")]
    IncompatibleFunctional(String),

    #[error("cell values of Y are collinear with the Y cell measures")]
    CollinearSupport,

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("singular perturbation in stratum {stratum}")]
    SingularPerturbation { stratum: usize },

    #[error("degenerate base law: {0}")]
    DegenerateBase(String),

    #[error("bracketing failed at step {step}: {detail}")]
    BracketingFailure { step: usize, detail: String },

    #[error("certification failed at step {step}: {detail}")]
    CertificationFailure { step: usize, detail: String },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("a Z arm is unobserved in the sample")]
    AllZOneArm,

    #[error("conditioning cell {0:?} unobserved in the sample")]
    EmptyStratum(Vec<usize>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

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

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
