use std::path::PathBuf;

/// Errors of the experiment layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] wkde::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("tail condition {condition} is violated for this configuration ({detail}); set override_tail=true to run anyway, or use the `necessity` subcommand to study the growth")]
    TailRefused { condition: String, detail: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for usage and configuration problems, 3 for numerical and IO failures.
    pub fn exit_code(&self) -> i32 {
        use wkde::Error as E;
        match self {
            LabError::Config(_) | LabError::UnknownKeys(_) | LabError::TailRefused { .. } => 2,
            LabError::Core(e) => match e {
                E::Dimension { .. }
                | E::Domain(_)
                | E::WindowNotYetValid { .. }
                | E::InvalidWindow(_)
                | E::InvalidKernel(_)
                | E::Config(_)
                | E::Usage(_) => 2,
                E::Accuracy { .. }
                | E::ModelInconsistency { .. }
                | E::InvariantViolation { .. }
                | E::DegenerateRegion(_) => 3,
            },
            LabError::Io { .. } | LabError::Csv(_) | LabError::Json(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Core(_) => "core",
            LabError::Config(_) => "config",
            LabError::UnknownKeys(_) => "unknown-keys",
            LabError::TailRefused { .. } => "tail-refused",
            LabError::Io { .. } => "io",
            LabError::Csv(_) => "csv",
            LabError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
