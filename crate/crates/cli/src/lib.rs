//! Scenario files, the end-to-end pipeline and report writers for the `lcvx`
//! command-line tool.

pub mod error;
pub mod pipeline;
pub mod report;
pub mod scenario;

pub use error::CliError;
pub use pipeline::{run_pipeline, sweep_n, Overrides, SweepRow};
pub use report::{emit_outputs, RunReport, RunStatus};
pub use scenario::{load_scenario, parse_scenario, Scenario};
