//! Configuration, mask ingestion, output writers and the run driver behind the
//! command-line tool.

pub mod config;
pub mod mask;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{parse_config, parse_raw, Config, ExperimentKind, RunManifest};
pub use mask::ingest_mask;
pub use presets::{preset, PRESETS};
pub use run::{run, RunOutcome};
