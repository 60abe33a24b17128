use thiserror::Error;

use weakdep::Error as CoreError;

/// Failure of a subcommand. Each variant owns one exit code; `report`
/// carries machine output still worth printing on failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation failed: {message}")]
    Validation { message: String, report: Option<String> },

    #[error("{0}")]
    Input(String),

    #[error("not in the model: {message}")]
    Membership { message: String, report: Option<String> },

    #[error("generation failed: {0}")]
    Generation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Input(_) => 2,
            CliError::Membership { .. } => 3,
            CliError::Generation(_) => 4,
        }
    }

    pub fn report(&self) -> Option<&str> {
        match self {
            CliError::Validation { report, .. } | CliError::Membership { report, .. } => report.as_deref(),
            _ => None,
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        CliError::Validation { message: message.into(), report: None }
    }

    pub(crate) fn membership(message: impl Into<String>) -> Self {
        CliError::Membership { message: message.into(), report: None }
    }
}

/// Default classification of library errors.
impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse(_) | CoreError::Io(_) | CoreError::InvalidInput(_) => CliError::Input(e.to_string()),
            CoreError::InvalidSupport(_)
            | CoreError::InvalidLaw(_)
            | CoreError::SupportMismatch
            | CoreError::IncompatibleFunctional(_)
            | CoreError::CollinearSupport => CliError::validation(e.to_string()),
            CoreError::NoSolution { .. }
            | CoreError::PositivityViolation { .. }
            | CoreError::ZeroConditioningMass { .. }
            | CoreError::AbsoluteContinuityViolation { .. } => CliError::membership(e.to_string()),
            CoreError::InvalidPerturbation(_)
            | CoreError::SingularPerturbation { .. }
            | CoreError::DegenerateBase(_)
            | CoreError::BracketingFailure { .. }
            | CoreError::CertificationFailure { .. } => CliError::Generation(e.to_string()),
            CoreError::EmptyDataset
            | CoreError::RowOutsideSupport { .. }
            | CoreError::DegenerateSample(_)
            | CoreError::AllZOneArm
            | CoreError::EmptyStratum(_) => CliError::validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("i/o: {e}"))
    }
}
