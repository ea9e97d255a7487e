use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A physical parameter lies outside its domain.
    #[error("parameter `{name}` out of domain: {reason}")]
    ParameterDomain { name: &'static str, reason: String },

    /// The linearised dynamics has an eigenvalue with non-negative real part
    /// (particle loss).
    #[error("dynamically unstable: {0}")]
    Unstable(String),

    #[error("trace too short: need at least {required} samples, got {got}")]
    TraceTooShort { required: usize, got: usize },

    #[error("analysis failed: {0}")]
    Analysis(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::ParameterDomain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
