//! Configuration, replicated runs, file output and printed reports.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{RunConfig, Variant};
pub use runner::{baseline, train, Replication};
