//! Experiment plumbing: synthetic domains, runs, sweeps, estimator evaluation and inspection.

pub mod eval;
pub mod gen;
pub mod inspect;
pub mod run;
pub mod truth;

use crate::domain::DomainError;
use crate::oracle::OracleError;
use crate::policy::PolicyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub use eval::{eval_estimators, EvalConfig, EvalReport, EvalRow, EvalSummary};
pub use gen::{GeneratorSpec, PopularityLaw, TreeShape};
pub use inspect::{inspect, jaccard, InspectReport};
pub use run::{mean_std, run_experiment, sweep, RunConfig, RunSummary, SeedOutcome, SweepRow};
pub use truth::{exact_gain, monte_carlo_gain, true_gain, TrueGain};
