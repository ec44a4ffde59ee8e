//! Command-line front end: configuration loading, suite dispatch, and
//! deterministic CSV/JSONL artifact writing.

pub mod config;
pub mod output;
pub mod suites;

pub use config::{FileConfig, Format, Overrides, RunConfig, Suite};
pub use output::Summary;

/// Failures are split by exit code: configuration problems (bad flags,
/// malformed TOML, impossible surface requests) exit with 2, while runtime
/// failures inside a suite exit with 1 like a failed numeric check.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Run(String),
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError::Config(msg.into())
    }

    pub fn run(msg: impl Into<String>) -> Self {
        RunError::Run(msg.into())
    }

    /// Process exit code mandated for this class of failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "configuration error: {msg}"),
            RunError::Run(msg) => write!(f, "run error: {msg}"),
        }
    }
}

impl std::error::Error for RunError {}
