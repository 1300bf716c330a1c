use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("field point lies {distance_m:.3e} m from the conductor (minimum {min_m:.1e} m)")]
    Singularity { distance_m: f64, min_m: f64 },

    #[error("quadrature did not converge: estimated error {error:.3e} exceeds target {target:.3e} after {intervals} subintervals")]
    Quadrature {
        error: f64,
        target: f64,
        intervals: usize,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("no start converged:\n{}", .0.join("\n"))]
    NonConvergence(Vec<String>),

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("scan at t = {time_s} s lies outside the reference bracket [{first_s}, {last_s}] s")]
    Extrapolation { time_s: f64, first_s: f64, last_s: f64 },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
