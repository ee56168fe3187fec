//! Experiment harness: random sublevel-set instances, batches of seeded
//! runs, reference solutions and CSV/plot output.

pub mod config;
mod error;
pub mod experiment;
pub mod generate;
pub mod output;
pub mod reference;

pub use config::{ExperimentConfig, ObjectiveFamily, ObjectiveInterpretation, ReferenceMode};
pub use error::{HarnessError, Result};
pub use experiment::{run_batch, run_batch_on, run_experiment, write_batch, Batch, Manifest};
pub use generate::{generate_instance, InstanceFile};
pub use reference::{reference_solve, OracleOptions};
