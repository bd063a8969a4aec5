use std::fmt;

use shmked::Error as CoreError;

/// Failure of a CLI command, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, unparsable or invalid configuration (exit 2).
    Config(Vec<String>),
    /// Upstream stages whose artifacts are missing or stale (exit 3).
    Dependency { stage: String, missing: Vec<String> },
    /// Numerical breakdown inside a stage (exit 4).
    Numerical(String),
    /// Anything else: I/O, corrupt artifacts, bad plot input (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Dependency { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn other(msg: impl Into<String>) -> Self {
        CliError::Other(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(problems) => {
                write!(f, "configuration error")?;
                for p in problems {
                    write!(f, "\n  - {p}")?;
                }
                Ok(())
            }
            CliError::Dependency { stage, missing } => write!(
                f,
                "{stage} cannot run: missing output of stage {}; run it first",
                missing.join(", ")
            ),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Other(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(format!("corrupt artifact: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
