//! Driver layer for the `bfstar` binary: configuration, single solves,
//! parameter sweeps, verification studies, and the files they write.

use std::path::{Path, PathBuf};

pub mod config;
pub mod output;
pub mod solve;
pub mod sweep;
pub mod verify;

pub use config::RunConfig;
pub use solve::{run_single, solve_config, SolveOutcome, SolveRecord};
pub use sweep::{run_sweep, SweepOutcome, SweepRow};
pub use verify::{run_verify, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NotConverged(_) => 2,
            Self::Config(_) => 3,
            Self::Io { .. } => 4,
            Self::VerificationFailed(_) => 5,
        }
    }
}
