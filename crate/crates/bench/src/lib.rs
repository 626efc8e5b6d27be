//! Measurement harness for `gp-core`.
//!
//! [`dataset`] produces seeded train/test splits, [`suite`] times each
//! inference path under a warmup-then-median protocol while reading the
//! buffer ledger, and [`table`] renders the records as CSV or Markdown.

pub mod dataset;
pub mod suite;
pub mod table;

use gp_core::GpError;
use thiserror::Error;

pub use dataset::{generate_dataset, Dataset, DatasetSpec, GeneratorKind};
pub use suite::{run_suite, BenchRecord, SuiteKind, SuiteParams};
pub use table::{emit_table, TableFormat};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Gp(#[from] GpError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    InvalidSpec(String),
}
