use std::fmt;

use reservoir_hydro::Error as CoreError;
use serde_json::json;

use crate::config::Origin;

/// Failures that end a run. The exit code is fixed by the variant.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, config entries or parameters: exit 2, nothing written.
    Input { message: String, origin: Option<Origin>, position: Option<usize> },
    /// Solver or resource failures: exit 3.
    Numeric { message: String },
    /// Writing outputs failed: exit 3.
    Io { message: String },
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input { message: message.into(), origin: None, position: None }
    }

    pub fn input_at(message: impl Into<String>, origin: Origin) -> Self {
        CliError::Input { message: message.into(), origin: Some(origin), position: None }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Numeric { .. } | CliError::Io { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input { .. } => "input",
            CliError::Numeric { .. } => "numeric",
            CliError::Io { .. } => "io",
        }
    }

    /// Single-line JSON record written to stderr.
    pub fn record(&self) -> String {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Input { origin: Some(o), position, .. } = self {
            match o {
                Origin::File { path, line, col } => {
                    v["file"] = json!(path.display().to_string());
                    v["line"] = json!(line);
                    v["column"] = json!(col);
                }
                other => v["source"] = json!(other.to_string()),
            }
            if let Some(p) = position {
                v["position"] = json!(p);
            }
        }
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input { message, origin, position } => {
                if let Some(o @ Origin::File { .. }) = origin {
                    write!(f, "{o}: ")?;
                }
                f.write_str(message)?;
                if let Some(p) = position {
                    write!(f, " at position {p}")?;
                }
                match origin {
                    Some(Origin::File { .. }) | None => Ok(()),
                    Some(o) => write!(f, " ({o})"),
                }
            }
            CliError::Numeric { message } | CliError::Io { message } => f.write_str(message),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Input(m) => CliError::input(m),
            CoreError::Parse { pos, msg } => CliError::Input { message: msg, origin: None, position: Some(pos) },
            other => CliError::Numeric { message: other.to_string() },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io { message: e.to_string() }
    }
}
