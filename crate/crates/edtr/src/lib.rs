//! Dataset IO, embedding client, synthetic data, persistence and the `edtr`
//! command-line tool built on [`edtr_core`].

pub mod cli;
pub mod config;
pub mod embed;
pub mod error;
pub mod ingest;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{Dataset, ReasoningSample, TrajectoryRecord};
pub use pipeline::ConfidenceReport;
