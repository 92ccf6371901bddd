use std::fmt;

pub const EXIT_OK: i32 = 0;
/// The command ran but failed: training blew up, dimensions disagree, an
/// oracle comparison did not pass.
pub const EXIT_RUNTIME: i32 = 1;
/// Bad invocation, unreadable or invalid config, missing input file.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError::Runtime(msg.to_string())
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

/// Library errors are runtime failures, except oracle guards, which reject
/// the request itself.
impl From<gnet_core::Error> for CliError {
    fn from(e: gnet_core::Error) -> Self {
        match e {
            gnet_core::Error::Guard(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
