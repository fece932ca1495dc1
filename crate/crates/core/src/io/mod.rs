//! Configuration files, canonical measurement CSV and ingestion.

pub mod config;
pub mod csv;

pub use config::FlatConfig;
pub use csv::{
    ingest, read_measurements, write_measurements, CsvRecord, IngestOptions, IngestReport,
};
