use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree {0}: need p >= {1}")]
    InvalidDegree(usize, usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("infeasible: phi({t}) = {phi} <= 0")]
    Infeasible { t: f64, phi: f64 },

    #[error("solver did not converge after {iterations} iterations (best bracket [{lo}, {hi}])")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("Crisanti-Sommers solver stopped after {iterations} iterations with KKT residual {kkt:e}")]
    SolverStalled { iterations: usize, kkt: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("size error: N^p = {n}^{p} exceeds the {limit} entry budget; try a smaller (n, p)")]
    Size { n: usize, p: usize, limit: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dynamics diverged at step {step} (non-finite coordinates); reduce the step size")]
    Divergence { step: usize },

    #[error("window scan failed at {} grid points: {failed:?}", failed.len())]
    PartialScan { failed: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
