//! Command-line front end and file formats for the `vrsim-core` simulator.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod plot;
pub mod report;
