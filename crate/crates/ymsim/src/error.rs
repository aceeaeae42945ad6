use std::fmt;
use std::io;
use std::path::Path;

/// Failures of a CLI run, each mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Core(ymsim_core::Error),
    Io(String),
    Parse(String),
    /// Input that was read correctly but fails a check (e.g. an invalid m_F assignment).
    Rejected(String),
}

impl CliError {
    pub fn io(path: &Path, e: io::Error) -> Self {
        CliError::Io(format!("{}: {}", path.display(), e))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    /// Short machine-readable class.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) if e.is_numerical() => "not_converged",
            CliError::Core(_) => "invalid",
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Rejected(_) => "rejected",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{}", e),
            CliError::Io(s) | CliError::Parse(s) | CliError::Rejected(s) => f.write_str(s),
        }
    }
}

impl From<ymsim_core::Error> for CliError {
    fn from(e: ymsim_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}
