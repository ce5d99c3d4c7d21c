//! File formats, run configuration and the training harness around
//! [`bbsp_core`].

pub mod checkpoint;
pub mod config;
pub mod dataset;
mod error;
pub mod harness;

pub use error::{Error, Result};
