//! Command-line harness: configuration, the experiment pipeline, run
//! manifests and report files.

pub mod cli;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;
