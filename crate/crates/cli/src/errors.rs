//! CLI errors with stable machine-parsable codes.

use std::fmt;

use epifit_core::Error as CoreError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        let mut message = message.into();
        // keep the diagnostic on one line
        if message.contains('\n') {
            message = message.replace('\n', " ");
        }
        CliError { code, message }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new("E_CONFIG", message)
    }

    pub fn args(message: impl Into<String>) -> Self {
        CliError::new("E_ARGS", message)
    }

    pub fn parse(message: impl Into<String>) -> Self {
        CliError::new("E_PARSE", message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::EmptyGroup { .. } => "E_EMPTY_GROUP",
            CoreError::LabelMismatch { .. } => "E_LABEL_MISMATCH",
            CoreError::ZeroRow { .. } | CoreError::ZeroCoarsePopulation { .. } => "E_ZERO_ROW",
            CoreError::NotRowNormalized { .. }
            | CoreError::NegativeKappa { .. }
            | CoreError::Eigen(_)
            | CoreError::IllConditioned { .. }
            | CoreError::ComplexResidue { .. } => "E_CONTACT_POWER",
            CoreError::Disconnected { .. }
            | CoreError::SelfLoop { .. }
            | CoreError::UnknownRegion { .. } => "E_REGION_GRAPH",
            CoreError::NonPositiveRho { .. } | CoreError::ZeroJointRow { .. } => "E_WEIGHTS",
            CoreError::BadWeek { .. } | CoreError::NonContiguousWeeks { .. } => "E_BAD_WEEK",
            CoreError::DuplicateCell { .. } => "E_DUPLICATE_CELL",
            CoreError::MissingCell { .. } => "E_MISSING_CELL",
            CoreError::NonConvergence { .. } | CoreError::BadInitialPoint => "E_NO_CONVERGENCE",
            CoreError::NotProfiled | CoreError::ProfiledKappaInFit => "E_PROFILE",
            CoreError::ProfileBoundary { .. } | CoreError::ProfileCiNotBracketed { .. } => {
                "E_PROFILE_RANGE"
            }
            CoreError::CovarianceUnavailable => "E_COVARIANCE",
            CoreError::FingerprintMismatch { .. } => "E_DATA_MISMATCH",
            CoreError::ExplosiveProcess { .. } => "E_EXPLOSIVE",
            CoreError::CountOverflow { .. } => "E_OVERFLOW",
            _ => "E_MODEL",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("E_IO", e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::new("E_PARSE", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new("E_PARSE", e.to_string())
    }
}
