use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const VERIFICATION: u8 = 4;
}

/// Machine-readable failure written to stderr as one JSON line.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub context: Map<String, Value>,
    #[serde(skip)]
    pub exit: u8,
}

impl CliError {
    pub fn config(code: &str, message: impl Into<String>) -> Self {
        CliError { code: code.into(), message: message.into(), context: Map::new(), exit: exit::CONFIG }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        CliError {
            code: "verification-failed".into(),
            message: message.into(),
            context: Map::new(),
            exit: exit::VERIFICATION,
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.context.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error report serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<qkdlab::Error> for CliError {
    fn from(e: qkdlab::Error) -> Self {
        let exit = match e {
            qkdlab::Error::Infeasible { .. } => exit::INFEASIBLE,
            _ => exit::CONFIG,
        };
        let mut err = CliError { code: e.code().into(), message: e.to_string(), context: Map::new(), exit };
        if let qkdlab::Error::Infeasible { requested, minimal } = e {
            err = err.with("requested_eve_dim", requested).with("minimal_eve_dim", minimal);
        }
        err
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config("json", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
