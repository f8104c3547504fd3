//! Experiment runner for the rational kriging studies: seeded designs,
//! replicated fits, CSV and JSON outputs, and model files.

pub mod config;
pub mod design;
pub mod error;
pub mod experiment;
pub mod model_io;
pub mod results;

pub use config::{ExperimentConfig, ExperimentKind, Method};
pub use error::{HarnessError, VersionError};
pub use experiment::{run_experiment, run_experiment_with, ExperimentOutput};
pub use model_io::{load_model, model_from_json, model_to_json, save_model, SavedModel};
pub use results::{ResultRow, Summary};
