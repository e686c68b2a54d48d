//! File formats, configuration, synthetic scenes and the pipeline glue behind
//! the `gedi` command-line tool.

pub mod checkpoint;
pub mod cloud_io;
pub mod config;
pub mod descriptor_io;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod pose_io;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
