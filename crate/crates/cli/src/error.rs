use std::fmt;

use blockade_core::Error as CoreError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }

    /// Classifies a core error raised while running `context`.
    pub fn engine(context: &str, e: CoreError) -> Self {
        use CoreError::*;
        let msg = format!("{context}: {e}");
        match e {
            InvalidCutoff { .. }
            | DimensionOverflow { .. }
            | SiteOutOfRange { .. }
            | DimensionMismatch { .. }
            | InvalidCoupling { .. }
            | InvalidParameter { .. }
            | UnsupportedTopology(_)
            | LiouvilleTooLarge { .. }
            | FitWindowTooNarrow { .. }
            | IncompatibleSeries(_) => CliError::Config(msg),
            _ => CliError::Numerical(msg),
        }
    }

    pub fn io(context: impl fmt::Display, e: impl fmt::Display) -> Self {
        CliError::Config(format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance gate failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
