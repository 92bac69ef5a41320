use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("archive format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml error: {0}")]
    Toml(String),
}

impl Error {
    /// Stable machine-readable tag, used in structured CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Shape(_) => "shape",
            Error::Argument(_) => "argument",
            Error::Numeric(_) => "numeric",
            Error::Singular(_) => "singular",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Data(_) => "data",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Toml(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Toml(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
