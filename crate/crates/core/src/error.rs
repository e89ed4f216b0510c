use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimensions, sizes or parameters that cannot describe a valid system.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// The dual ascent did not reach its tolerance; the best primal point seen
    /// is kept so callers can inspect or reuse it.
    #[error("dual ascent did not converge after {iterations} iterations (residual {residual:.3e})")]
    DualNonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<num_complex::Complex64>,
    },

    #[error("effective channel is rank deficient (columns {columns:?})")]
    RankDeficient { columns: Vec<usize> },

    #[error("selection rounding failed: {0}")]
    Rounding(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("seed {seed}: {source}")]
    AtSeed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_seed(self, seed: u64) -> Self {
        Error::AtSeed {
            seed,
            source: Box::new(self),
        }
    }
}
