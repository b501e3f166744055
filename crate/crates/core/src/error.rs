use std::path::PathBuf;

use thiserror::Error;

use crate::units::UnitError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Unit(#[from] UnitError),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("invalid value for parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("power {power_w} W is below the deliverable minimum {minimum_w} W at OCV {ocv_v} V")]
    PowerBelowMinimum {
        power_w: f64,
        minimum_w: f64,
        ocv_v: f64,
    },

    #[error("pack network solve did not converge after {iterations} iterations (residual {residual_w} W)")]
    SolveDiverged { iterations: usize, residual_w: f64 },

    #[error("trace {path}: {reason}")]
    Trace { path: PathBuf, reason: String },

    #[error("trace covers {first} .. {last}, simulation needs {needed_from} .. {needed_to}")]
    TraceUnderrun {
        first: String,
        last: String,
        needed_from: String,
        needed_to: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed: {0}")]
    Write(#[source] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl Error {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.to_owned(),
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
