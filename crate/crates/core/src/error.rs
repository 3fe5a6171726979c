use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("inductance grid is empty")]
    EmptyGrid,

    #[error("inductance grid is not strictly increasing")]
    UnsortedGrid,

    #[error("slope must be positive and finite")]
    ZeroSlope,

    #[error("photon number {n} outside the configured range 1..={max}")]
    PhotonNumberOutOfRange { n: u32, max: u32 },

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("sample interval mismatch between trace and template")]
    SampleIntervalMismatch,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("classification unavailable: {0} peak(s) found, need at least {1}")]
    TooFewPeaks(usize, usize),

    #[error("peak centers are not strictly increasing")]
    NonMonotonePeaks,

    #[error("photon class {0} has no members")]
    EmptyClass(u32),

    #[error("no level crossing found: {0}")]
    NoCrossing(&'static str),

    #[error("pulse shape calibration failed: {0}")]
    Calibration(String),

    #[error("malformed trace file: {0}")]
    Format(String),

    #[error("malformed grid spec `{0}`")]
    GridSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// `true` for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::EmptyGrid
                | Error::UnsortedGrid
                | Error::GridSpec(_)
                | Error::PhotonNumberOutOfRange { .. }
        )
    }
}
