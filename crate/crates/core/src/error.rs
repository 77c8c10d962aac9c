use thiserror::Error;

/// Errors raised by estimation, generation and spectra I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("signal {index} ({label}) is constant; affine alignment is undefined")]
    DegenerateSignal { index: usize, label: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in signal {index} at coordinate {coordinate}")]
    NonFinite { index: usize, coordinate: usize },

    #[error("need at least {required} signals, got {actual}")]
    TooFewSignals { required: usize, actual: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("scale law produced {0} consecutive non-positive draws")]
    ScaleLawRejected(usize),

    #[error("frame is not orthonormal: {0}")]
    FrameNotOrthonormal(String),

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("MSC slope for signal {index} ({label}) is {slope:e}, too close to zero")]
    NearZeroSlope {
        index: usize,
        label: String,
        slope: f64,
    },

    #[error("CSV parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
