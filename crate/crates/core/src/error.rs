use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("image has no pixels")]
    EmptyImage,

    #[error("histogram has a single occupied intensity ({intensity}); no threshold separates it")]
    DegenerateHistogram { intensity: u8 },

    #[error("sigma must be finite and positive, got {0}")]
    InvalidSigma(f64),

    #[error("clustering needs at least {k} distinct points, found {distinct}")]
    TooFewDistinctPoints { k: usize, distinct: usize },

    #[error("no input points")]
    EmptyInput,

    #[error("index {index} out of range for {len} clusters")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape does not fit inside a {width}x{height} image")]
    ShapeOutOfBounds { width: usize, height: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported or malformed image: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the content of a valid input rather than
    /// by a malformed file or a bad parameter.
    pub fn is_degenerate_input(&self) -> bool {
        matches!(
            self,
            Error::EmptyImage
                | Error::DegenerateHistogram { .. }
                | Error::TooFewDistinctPoints { .. }
                | Error::EmptyInput
        )
    }

    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_) | Error::Io(_) | Error::Csv(_) | Error::DimensionMismatch { .. }
        )
    }
}
