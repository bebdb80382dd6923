use thiserror::Error;

use crate::kernel::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on axis `{axis}`: expected {expected}, found {found}")]
    Dimension {
        axis: String,
        expected: usize,
        found: usize,
    },

    #[error("{axis} index {index} out of range (alphabet size {size})")]
    IndexOutOfRange {
        axis: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("kernel is not stochastic ({} violations, first: {})", .0.len(), .0[0])]
    InvalidKernel(Vec<Violation>),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("strategy expansion needs {blowup} decoder strategies, above the cap of {cap}")]
    ExpansionTooLarge { blowup: u128, cap: usize },

    #[error("{what} needs {size} entries, above the cap of {cap}")]
    SizeCap {
        what: &'static str,
        size: u128,
        cap: usize,
    },

    #[error("distribution is not normalized: total mass {0}")]
    NotNormalized(f64),

    #[error("budget {budget} is below the minimum achievable cost {min_cost}")]
    Infeasible { budget: f64, min_cost: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
