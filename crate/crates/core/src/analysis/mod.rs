//! Closed-form bandwidth analysis, bad-pattern census and the Markov
//! reliability model, with CSV output for plotting.

mod bounds;
mod census;
mod csvout;
mod markov;

pub use bounds::{
    bandwidth_lower_bound, bandwidth_lower_bound_with_d, bandwidth_ratio_table, Fraction,
    RatioRow, RatioTable,
};
pub use census::{census, census_sampled, CensusReport, SampledCensus, DEFAULT_CENSUS_BUDGET};
pub use csvout::{emit_csv, read_csv, write_csv, CsvTable};
pub use markov::{
    mttf, mttf_dense, mttf_monte_carlo, mttf_sweep, MarkovParams, MttfRow, MttfSweep, Scheme,
    SECONDS_PER_YEAR,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::recovery::RecoveryError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("census of {patterns} patterns exceeds the budget of {budget}; use sampling mode")]
    BudgetExceeded { patterns: u64, budget: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}
