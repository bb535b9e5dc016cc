use std::fmt;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Inconsistent or missing arguments (exit 2).
    Usage(String),
    /// Unreadable, malformed or invalid input (exit 3).
    Data(String),
    /// A computation that failed on valid input (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Classifies a library error raised while computing: problems with the
    /// inputs are data errors, everything else is numerical.
    pub fn from_compute(e: skewgof::Error) -> Self {
        use skewgof::Error as E;
        match e {
            E::DimensionMismatch { .. } | E::InvalidParameter(_) | E::EmptySample | E::Unsupported(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }

    /// A library error raised while validating user input.
    pub fn from_input(e: skewgof::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
