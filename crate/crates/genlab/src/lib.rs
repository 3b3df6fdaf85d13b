//! Capacity sweeps over critic width: configuration, the sweep runner, and
//! CSV, JSON and SVG reports.

pub mod config;
pub mod error;
pub mod report;
pub mod svg;
pub mod sweep;

pub use config::{parse_config, SweepSpec};
pub use error::{GenlabError, Result};
pub use report::SweepResultRow;
pub use sweep::{run_sweep, SweepOutcome};
