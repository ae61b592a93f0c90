use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input. `field` is a dotted path such as `model.obs_noise_var[1]`.
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("degenerate observation covariance")]
    DegenerateCovariance,

    #[error("no sensor can be activated")]
    NoActiveSensor,

    #[error("gradient undefined at boundary (sensor {0} has zero rate)")]
    GradientAtBoundary(usize),

    #[error("use bisection path: the ellipsoid update needs at least two dimensions")]
    OneDimensional,

    #[error("degenerate cut")]
    DegenerateCut,

    #[error("level index {index} out of range for {bits}-bit quantizer")]
    IndexOutOfRange { index: usize, bits: u32 },

    #[error("non-finite quantizer input {0}")]
    NonFinite(f64),

    #[error("rate {0} is not a positive number of bits")]
    BadRate(f64),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), reason: reason.into() }
    }

    /// True for errors caused by user input rather than internal failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid { .. } | Error::BadRate(_) | Error::IndexOutOfRange { .. } | Error::NonFinite(_)
        )
    }
}
