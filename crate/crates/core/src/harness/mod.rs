//! Experiment configuration, pass/fail rules, statistics helpers and the
//! experiment drivers behind the `sbmo` command line.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod quenched;
pub mod regression;
pub mod report;
pub mod subsequence;

pub use checks::Check;
pub use config::{ExperimentConfig, ExperimentId, GridFormat, MassSampler, SolverSettings, SubsequenceSpec};
pub use experiments::{run, run_to};
pub use regression::{rate_regression, RateRegression};
pub use report::{Outcome, SummaryRow};
pub use subsequence::{subsequence, summable};
