//! File formats, experiment specifications and the runner for the
//! `curvflow-core` schemes.

pub mod config;
pub mod error;
pub mod io;
pub mod runner;

pub use error::{Error, Result};
