//! Runtime for the teaching workbench: file formats, SVG rendering, the
//! simulation and evaluation drivers behind the `teachgym` binary, and the
//! HTTP session service.

pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod formats;
pub mod logfile;
pub mod parallel;
pub mod render;
pub mod service;
pub mod simulate;

pub use error::{AppError, AppResult};

/// Version recorded in manifests and session logs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
