use thiserror::Error;

use crate::tt::TtVector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense limit exceeded: {size} entries > limit {limit}")]
    DenseLimit { size: usize, limit: usize },

    #[error("rank cap {cap} prevents tolerance {tolerance:e}; achieved relative error {achieved:e}")]
    RankCap { cap: usize, tolerance: f64, achieved: f64 },

    #[error("block {block} is not orthogonalised for pivot {pivot}")]
    NotOrthogonal { block: usize, pivot: usize },

    #[error("singular local system at block {block}")]
    LocalBreakdown { block: usize },

    #[error("solver did not converge after {sweeps} sweeps (residual {residual:e} > {tolerance:e})")]
    NotConverged { sweeps: usize, residual: f64, tolerance: f64 },

    #[error("Frobenius norm drift {drift:e} exceeds the conservation limit")]
    NormDrift { drift: f64 },

    #[error("interval {interval}: {source}")]
    Interval {
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("propagation aborted at interval {interval} after {} states: {source}", partial.len())]
    Propagation {
        interval: usize,
        partial: Vec<TtVector>,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_interval(self, interval: usize) -> Self {
        match self {
            e @ Error::Interval { .. } => e,
            e => Error::Interval { interval, source: Box::new(e) },
        }
    }
}
