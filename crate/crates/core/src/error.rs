use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the analysis pipeline.
///
/// Every variant maps to a stable numeric [`ErrorCode`] used as the CLI exit
/// status and as the return value of the C ABI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Usage { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ErrorCode {
    Domain = 2,
    UndefinedRate = 3,
    NoData = 4,
    Schema = 5,
    Usage = 6,
    Io = 7,
    Serialize = 8,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Domain => "E_DOMAIN",
            ErrorCode::UndefinedRate => "E_UNDEFINED_RATE",
            ErrorCode::NoData => "E_NO_DATA",
            ErrorCode::Schema => "E_SCHEMA",
            ErrorCode::Usage => "E_USAGE",
            ErrorCode::Io => "E_IO",
            ErrorCode::Serialize => "E_SERIALIZE",
        }
    }
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::Domain(_) => ErrorCode::Domain,
            Error::UndefinedRate(_) => ErrorCode::UndefinedRate,
            Error::NoData(_) => ErrorCode::NoData,
            Error::Schema { .. } => ErrorCode::Schema,
            Error::Usage { .. } => ErrorCode::Usage,
            Error::Io { .. } => ErrorCode::Io,
            Error::Serialize(_) => ErrorCode::Serialize,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn schema(line: usize, msg: impl Into<String>) -> Self {
        Error::Schema {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn usage(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Usage {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::schema(line, e.to_string())
    }
}
