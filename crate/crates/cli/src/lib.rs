//! Scenario files, presets and the CSV runner behind the `qbm` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod presets;
pub mod run;

pub use config::{load_config, parse_config, validate_config, ConfigError, Diagnostic, Scenario, ScenarioConfig};
pub use presets::{list_presets, preset, presets};
pub use run::{run_scenario, trajectory, write_csv, EngineOutcome, RunError, CSV_HEADER};
