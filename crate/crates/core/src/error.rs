use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid step CDF: {0}")]
    InvalidCdf(String),

    #[error("invalid particle system: {0}")]
    InvalidParticles(String),

    #[error("particle count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("unknown flux `{0}`")]
    UnknownFlux(String),

    #[error("invalid flux: {0}")]
    InvalidFlux(String),

    #[error("characteristics cross at index {index} by time {time}")]
    NonClassical { index: usize, time: f64 },

    #[error("flux `{0}` is not shock-admissible for increasing 0 -> 1 data")]
    NonAdmissibleFlux(String),

    #[error("quantile bracket not found for w = {w} after {widenings} widenings")]
    BracketFailure { w: f64, widenings: usize },

    #[error("entropy residual needs at least 3 snapshots, got {0}")]
    TooFewSnapshots(usize),

    #[error("snapshots are not uniformly spaced in time")]
    NonUniformSnapshots,

    #[error("line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },

    #[error("config field `{field}`: {msg}")]
    ConfigField { field: String, msg: String },

    #[error("invalid result table: {0}")]
    InvalidTable(String),

    #[error("no exact oracle for {0}")]
    OracleUnavailable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Write(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            domain,
        }
    }

    pub(crate) fn field(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::ConfigField {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by the user's configuration rather than by the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigSyntax { .. }
                | Error::ConfigField { .. }
                | Error::UnknownFlux(_)
                | Error::InvalidFlux(_)
                | Error::Io { .. }
        )
    }
}
