use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{0}")]
    Usage(String),
    /// `line` is 1-based; 0 when the problem is not tied to one line.
    #[error("{}", located(path, *line, msg))]
    Config { path: String, line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] epdetect_core::Error),
}

impl SimError {
    /// 2 for problems with the invocation or its inputs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Usage(_) | SimError::Config { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}

fn located(path: &str, line: usize, msg: &str) -> String {
    if line == 0 {
        format!("{path}: {msg}")
    } else {
        format!("{path}:{line}: {msg}")
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
