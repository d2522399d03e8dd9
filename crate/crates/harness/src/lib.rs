//! Experiment harness for `hvlab-core`: TOML configuration, named scenarios,
//! Cartesian sweeps and deterministic JSON/CSV reports.

pub mod config;
pub mod error;
pub mod report;
pub mod scenario;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{ConfigError, HarnessError, Result};
pub use report::{Headline, Payload, Report};
pub use scenario::{run, Scenario};
pub use sweep::{sweep, write_summary, CellOutcome};
