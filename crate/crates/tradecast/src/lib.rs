//! Trade-series forecasting on top of `tradecast-core`: CSV ingestion, model
//! and report file formats, SVG figures and the `tradecast` command line.

pub mod cli;
pub mod config;
mod error;
pub mod forecast;
pub mod ingest;
pub mod json;
pub mod model_file;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
