use std::fmt;

/// Every failure the library can report. Each variant carries a stable
/// `E_*` code (see [`Error::code`]) that the command line surfaces verbatim.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("class count {0} outside the supported range")]
    BadK(usize),
    #[error("no domain specifications given")]
    EmptySpecs,
    #[error("class {class} has no support in domain {domain}")]
    NoSupport { domain: usize, class: usize },
    #[error("domain {0} has no samples")]
    EmptyDomain(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes in {0}")]
    BadMagic(String),
    #[error("{0} is shorter than its header declares")]
    Truncated(String),
    #[error("invalid architecture: {0}")]
    BadArch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("not a probability vector: {0}")]
    BadProb(String),
    #[error("class {0} has no samples to draw from")]
    EmptyClass(usize),
    #[error("discriminator output outside the log domain")]
    LogDomain,
    #[error("unknown method `{0}`")]
    BadMethod(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Exit classes used by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
}

impl Error {
    pub fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::BadK(_) => "E_BAD_K",
            Error::EmptySpecs => "E_EMPTY_SPECS",
            Error::NoSupport { .. } => "E_NO_SUPPORT",
            Error::EmptyDomain(_) => "E_EMPTY_DOMAIN",
            Error::Io { .. } => "E_IO",
            Error::BadMagic(_) => "E_BAD_MAGIC",
            Error::Truncated(_) => "E_TRUNCATED",
            Error::BadArch(_) => "E_BAD_ARCH",
            Error::Shape(_) => "E_SHAPE",
            Error::Empty(_) => "E_EMPTY",
            Error::NonFinite(_) => "E_NONFINITE",
            Error::BadProb(_) => "E_BAD_PROB",
            Error::EmptyClass(_) => "E_EMPTY_CLASS",
            Error::LogDomain => "E_LOG_DOMAIN",
            Error::BadMethod(_) => "E_BAD_METHOD",
            Error::Config { .. } => "E_CONFIG",
            Error::Invalid(_) => "E_INVALID",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::BadMagic(_) | Error::Truncated(_) => ErrorClass::Io,
            Error::NonFinite(_) | Error::LogDomain | Error::BadProb(_) => ErrorClass::Numeric,
            _ => ErrorClass::Config,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
