use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error{}{}: {message}", key_suffix(key), line_suffix(*line, *column))]
    Parse {
        key: String,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },

    #[error("invalid config: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: stiefel_priors::Error,
    },

    #[error("{context}: {message}")]
    Io { context: String, message: String },

    #[error("STIEFEL_THREADS: {0}")]
    Threads(String),
}

fn key_suffix(key: &str) -> String {
    if key.is_empty() || key == "." {
        String::new()
    } else {
        format!(" at `{key}`")
    }
}

fn line_suffix(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) if l > 0 => format!(" (line {l}, column {c})"),
        _ => String::new(),
    }
}

impl CliError {
    pub fn parse(key: impl Into<String>, at: Option<(usize, usize)>, message: impl Into<String>) -> Self {
        let key = key.into();
        CliError::Parse {
            key: if key == "." { String::new() } else { key },
            line: at.map(|a| a.0).filter(|&l| l > 0),
            column: at.map(|a| a.1).filter(|&l| l > 0),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            context: context.into(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "ParseError",
            CliError::Validation(_) => "ValidationError",
            CliError::Run { source, .. } => source.kind(),
            CliError::Io { .. } => "Io",
            CliError::Threads(_) => "ThreadConfig",
        }
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) | CliError::Threads(_) => 2,
            _ => 1,
        }
    }

    /// The machine-readable form printed on failure.
    pub fn to_json(&self) -> Value {
        let mut e = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            CliError::Parse { key, line, column, .. } => {
                e["key"] = json!(key);
                e["line"] = json!(line);
                e["column"] = json!(column);
            }
            CliError::Validation(v) => e["violations"] = json!(v),
            CliError::Run { context, .. } | CliError::Io { context, .. } => e["context"] = json!(context),
            CliError::Threads(_) => {}
        }
        json!({ "error": e })
    }
}

/// Attaches context to core errors.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for stiefel_priors::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Run {
            context: context(),
            source,
        })
    }
}
