//! Experiment harness around the conditional-independence testing core:
//! config files, CSV ingestion, replication loops, and population-gap
//! studies, shared by the `ci-robust` binary and the integration tests.

pub mod config;
pub mod ingest;
pub mod runner;
pub mod selfcheck;
pub mod theory;

pub use config::{ConfigError, ExperimentConfig, TheoryConfig};
pub use ingest::IngestError;
pub use runner::{run_experiment, run_single_test, HarnessError, Report, SweepPoint};
pub use theory::{run_theory, TheoryReport};
