//! Run configuration, click-record streams and statistics files.

pub mod config;
pub mod records;

pub use config::{RunConfig, SearchSettings};
pub use records::{
    ingest_records, parse_statistics, read_records, IngestedStatistics, RecordWriter,
    RECORD_HEADER,
};
