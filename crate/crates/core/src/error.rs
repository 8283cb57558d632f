use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    Domain(String),
    /// Fewer data points than free parameters.
    Underdetermined { points: usize, free: usize },
    UnknownModel(String),
    UnknownParameter { model: String, name: String },
    UnknownDataset(String),
    /// A fit inside a temperature scan did not converge.
    ScanFit { temperature: f64, reason: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Underdetermined { points, free } => write!(
                f,
                "underdetermined fit: {points} data points for {free} free parameters"
            ),
            Error::UnknownModel(name) => write!(f, "unknown model `{name}`"),
            Error::UnknownParameter { model, name } => {
                write!(f, "model `{model}` has no parameter `{name}`")
            }
            Error::UnknownDataset(name) => write!(f, "no bundled dataset `{name}`"),
            Error::ScanFit {
                temperature,
                reason,
            } => write!(f, "echo fit failed at T = {temperature} K: {reason}"),
        }
    }
}

impl core::error::Error for Error {}
