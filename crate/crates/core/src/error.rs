use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tone at {frequency_hz} Hz violates Nyquist limit {nyquist_hz} Hz")]
    Nyquist { frequency_hz: f64, nyquist_hz: f64 },

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: f64, right: f64 },

    #[error("signal has no samples")]
    EmptySignal,

    #[error("correlation peak at lag {lag} is too close to the correlation edge")]
    PeakNearEdge { lag: isize },

    #[error("correlation peak is flat or degenerate")]
    DegeneratePeak,

    #[error("emissions are not frequency locked ({first} Hz vs {other} Hz)")]
    FrequencyMismatch { first: f64, other: f64 },

    #[error("ideal coherent power is zero")]
    ZeroAmplitude,

    #[error("threshold {0} is not part of the surface")]
    UnknownThreshold(f64),

    #[error("malformed waveform file: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
