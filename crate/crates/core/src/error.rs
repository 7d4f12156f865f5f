use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// `1 - P++` vanishes inside the support, so the product-form weight ratio is undefined.
    #[error("degenerate weight ratio: 1 - P++({n_plus}) = 0 blocks the product form at free-plus index {ell}")]
    DegenerateWeight { ell: usize, n_plus: usize },

    /// More than one closed class; ranges are inclusive free-plus indices.
    #[error("reducible chain, closed classes (free-plus index ranges): {classes:?}")]
    Reducible { classes: Vec<(usize, usize)> },

    #[error("stationary solvers disagree: max difference {max_diff:e}")]
    SolverDisagreement { max_diff: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
