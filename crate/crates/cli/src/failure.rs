use std::fmt;

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    NotConverged = 1,
    Config = 2,
    Invariant = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub status: ExitStatus,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Config, message: message.into() }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Invariant, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<saddlekit::Error> for Failure {
    fn from(e: saddlekit::Error) -> Self {
        use saddlekit::Error as E;
        let status = match e {
            E::Diverged(_) => ExitStatus::NotConverged,
            E::EigenvalueAtMinusOne(_) => ExitStatus::Invariant,
            _ => ExitStatus::Config,
        };
        Self { status, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::invariant(format!("could not serialize report: {e}"))
    }
}

pub type CmdResult = Result<ExitStatus, Failure>;
