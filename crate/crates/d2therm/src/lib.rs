//! Ensemble driver and file formats for `d2therm-core`.
//!
//! * [`ensemble`] runs the Monte Carlo thermal ensemble in parallel with
//!   results that do not depend on the worker count.
//! * [`config`] reads the JSON run configuration, applies `key=value`
//!   overrides and validates it.
//! * [`output`] writes the CSV bundle and run manifest.
//! * [`checkpoint`] saves and restores ensemble accumulators.

pub mod checkpoint;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod output;

pub use config::{ConfigFile, ResolvedRun};
pub use ensemble::{
    resume_ensemble, run_ensemble, run_ensemble_range, EnsembleOptions, EnsembleResult,
};
pub use error::SimError;
