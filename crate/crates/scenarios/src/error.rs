use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{origin}{}: {message}", .line.map(|l| format!(":{l}")).unwrap_or_default())]
    Schema {
        origin: String,
        line: Option<usize>,
        message: String,
    },
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("physics check failed: {0}")]
    Physics(String),
}

impl ConfigError {
    pub fn field(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] slp_core::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("run stopped early: {0}")]
    Stopped(String),
}

impl RunError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Io(_) | RunError::Stopped(_) => 3,
        }
    }
}
