use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("coupling matrix is not symmetric at ({row}, {col}): {a} vs {b}")]
    NotSymmetric {
        row: usize,
        col: usize,
        a: f64,
        b: f64,
    },

    #[error("coherence matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("cannot normalize bath couplings: all spectral weights vanish")]
    DegenerateSpectralDensity,

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value in trajectory state at t = {t} ps")]
    NonFinite { t: f64 },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
