use std::path::PathBuf;

use hvlab_core::minimizers::MinimizeError;
use hvlab_core::solver::SolveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown scenario `{0}` (known: {known})", known = crate::scenario::Scenario::NAMES.join(", "))]
    UnknownScenario(String),
    #[error("sweep needs at least one axis with at least one value")]
    EmptyAxes,
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error("axis `{axis}` needs a nonnegative integer, got {value}")]
    NonIntegerAxis { axis: String, value: f64 },
    #[error("malformed axis specification `{0}` (expected name=v1,v2,...)")]
    AxisSyntax(String),
    #[error("scenario `{scenario}` does not belong to the `{command}` command")]
    ScenarioMismatch { scenario: String, command: String },
    #[error("failed to read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario `{scenario}`: {source}")]
    Core {
        scenario: String,
        #[source]
        source: hvlab_core::Error,
    },
    #[error("scenario `{scenario}`: {source}")]
    Solve {
        scenario: String,
        #[source]
        source: Box<SolveError>,
    },
    #[error("scenario `{scenario}`: {source}")]
    Minimize {
        scenario: String,
        #[source]
        source: Box<MinimizeError>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Short status tag used in sweep summary rows.
    pub fn status(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config-error",
            HarnessError::Solve { source, .. } => match **source {
                SolveError::Collapse { .. } => "collapse",
                SolveError::MaxIter { .. } => "max-iter",
                SolveError::Core(_) => "error",
            },
            HarnessError::Minimize { source, .. } => match **source {
                MinimizeError::MaxIter { .. } => "max-iter",
                MinimizeError::Core(_) => "error",
            },
            _ => "error",
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
