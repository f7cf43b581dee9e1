use thiserror::Error;

/// Errors raised anywhere in the transmit/receive pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid message: {0}")]
    InvalidMessage(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Posterior variance is not below the prior variance, so the
    /// orthogonalized message carries no information.
    #[error("no information gained (v_post = {v_post}, v_pri = {v_pri})")]
    NoInformation { v_post: f64, v_pri: f64 },

    /// The denoiser output is identically zero after SURE correction.
    #[error("degenerate nonlinear estimate: {0}")]
    DegenerateNle(String),

    #[error("nonlinear estimator failed: {0}")]
    Nle(String),

    #[error("integration diverged at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("bridge error: {0}")]
    Bridge(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidDimension(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}
