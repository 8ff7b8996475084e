//! Slot loop, Monte Carlo campaigns, configuration and result files.

pub mod config;
pub mod experiment;
pub mod jensen;
pub mod output;
pub mod rng;
pub mod trial;

pub use config::{ExperimentConfig, JensenSettings};
pub use experiment::{aggregate, run_experiment, ExperimentResult, PolicyAggregate, TrialFailure};
pub use jensen::{jensen_check, off_diagonal_stats, JensenCheck, OffDiagonalStats};
pub use output::{parse_csv, write_csv, write_outputs, CsvRecord};
pub use rng::{Purpose, Streams};
pub use trial::{SlotRecord, TrialRunner};
