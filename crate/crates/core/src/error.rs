use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its allowed domain.
    #[error("invalid {field}: {constraint} (got {value})")]
    InvalidParameter {
        field: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A spectral search found nothing significant above its noise floor.
    #[error("no resonance above the noise floor")]
    NoResonance,

    #[error("no grating above the spectral median")]
    NoGrating,

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, constraint: &'static str, value: f64) -> Self {
        Error::InvalidParameter {
            field,
            constraint,
            value,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
