use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const INVALID_INPUT: i32 = 2;
    pub const IO: i32 = 3;
    pub const DEGENERATE: i32 = 4;
    pub const EMPTY_CANDIDATES: i32 = 5;
    pub const REFUSED_OVERWRITE: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {source}", path.display())]
    InvalidFile {
        path: PathBuf,
        source: ftir_decomp::Error,
    },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("refusing to overwrite {} (pass --force)", .0.display())]
    WouldOverwrite(PathBuf),
    #[error(transparent)]
    Core(#[from] ftir_decomp::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ftir_decomp::Error as E;
        match self {
            CliError::Invalid(_) | CliError::MissingInput(_) => exit::INVALID_INPUT,
            CliError::Io { .. } => exit::IO,
            CliError::WouldOverwrite(_) => exit::REFUSED_OVERWRITE,
            CliError::InvalidFile { source, .. } | CliError::Core(source) => match source {
                E::DegenerateSignal { .. } | E::NearZeroSlope { .. } => exit::DEGENERATE,
                E::EmptyCandidates => exit::EMPTY_CANDIDATES,
                E::Io(_) => exit::IO,
                _ => exit::INVALID_INPUT,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
