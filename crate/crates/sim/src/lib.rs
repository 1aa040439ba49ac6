//! File formats, thread pool and command line around `epdetect-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;

pub use config::SimConfig;
pub use error::{Result, SimError};
pub use exec::RayonExecutor;
pub use output::emit_csv;
