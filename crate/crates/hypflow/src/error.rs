//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone)]
pub enum Error {
    /// Invalid configuration or arguments. Carries every violation found, not
    /// just the first.
    Config(Vec<String>),
    /// Principal curvatures left the defining cone of the curvature function.
    Admissibility {
        t: f64,
        /// Offending node indices (truncated to the first few).
        nodes: Vec<usize>,
        detail: String,
    },
    /// Input outside the valid range of a coordinate map.
    Domain(String),
    /// Non-finite value produced at a grid node.
    Numerics { node: usize, detail: String },
    /// Finite-difference stencil would leave the admissible region.
    Stencil(String),
    /// Rate fit rejected; carries the offending sample times.
    Fit { bad_times: Vec<f64>, detail: String },
    /// File format problem (headers, columns, version keys).
    Schema(String),
    /// I/O failure with the path involved.
    Io { path: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    pub fn is_admissibility(&self) -> bool {
        matches!(self, Error::Admissibility { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(violations) => {
                write!(f, "configuration error:")?;
                for v in violations {
                    write!(f, "\n  - {v}")?;
                }
                Ok(())
            }
            Error::Admissibility { t, nodes, detail } => {
                write!(f, "inadmissible curvatures at t = {t}: {detail} (nodes {nodes:?})")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Numerics { node, detail } => {
                write!(f, "numerics error at node {node}: {detail}")
            }
            Error::Stencil(msg) => write!(f, "stencil error: {msg}"),
            Error::Fit { bad_times, detail } => {
                write!(f, "rate-fit error: {detail} (t = {bad_times:?})")
            }
            Error::Schema(msg) => write!(f, "schema error: {msg}"),
            Error::Io { path, detail } => write!(f, "i/o error on {path}: {detail}"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    pub fn io(path: impl Into<String>, err: std::io::Error) -> Self {
        Error::Io { path: path.into(), detail: err.to_string() }
    }
}
