use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A retained Fourier-series coefficient of the kernel is too small to divide by.
    #[error(
        "ill-conditioned kernel: |g_hat({lambda})| / |g_hat(0)| = {ratio:.3e}; use a smaller bandlimit"
    )]
    IllConditionedKernel { lambda: usize, ratio: f64 },

    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("pipeline failure: {0}")]
    PipelineFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateSystem(msg.into())
    }
}
