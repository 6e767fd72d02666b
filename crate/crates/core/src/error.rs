use std::path::PathBuf;

use thiserror::Error;

use crate::discovery::LossPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("ill-conditioned QR backward: |R[{index},{index}]| = {value:e}")]
    IllConditioned { index: usize, value: f64 },

    #[error("rank collapse of the hyperplane weights at iteration {iteration} (column {column})")]
    RankCollapse { iteration: usize, column: usize },

    #[error("numerical divergence at iteration {iteration}: {what}")]
    Divergence { iteration: usize, what: String },

    #[error("discovery diverged at iteration {iteration} after {} recorded steps", trace.len())]
    DiscoveryDiverged {
        iteration: usize,
        trace: Vec<LossPoint>,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed artifact {}: {reason}", path.display())]
    Artifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{0} grid cells failed")]
    PartialGrid(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Artifact {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::IllConditioned { .. }
                | Error::RankCollapse { .. }
                | Error::Divergence { .. }
                | Error::DiscoveryDiverged { .. }
                | Error::Degenerate(_)
                | Error::DegenerateLabels(_)
        )
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Argument(msg()))
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Argument(format!(
            "{what} contains a non-finite value at index {i}"
        ))),
    }
}
