//! Exit statuses and the machine-readable diagnostics printed on stderr.

use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_WARNINGS: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, configuration or unusable inputs.
    Usage(String),
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn diagnostic(&self) -> String {
        let (kind, message) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Internal(m) => ("internal", m),
        };
        json!({ "error": kind, "message": message }).to_string()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

impl From<xtal_core::Error> for Failure {
    fn from(e: xtal_core::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

/// A finished run; any warning turns the exit status into
/// [`EXIT_WARNINGS`].
#[derive(Debug, Default)]
pub struct Outcome {
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn code(&self) -> i32 {
        if self.warnings.is_empty() {
            EXIT_OK
        } else {
            EXIT_WARNINGS
        }
    }
}

pub fn warning_line(message: &str) -> String {
    json!({ "warning": message }).to_string()
}
