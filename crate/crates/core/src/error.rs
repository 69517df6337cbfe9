use crate::lattice::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step budget of {budget} events exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("enumeration of {windows} windows exceeds the budget of {budget}")]
    EnumerationBudget { windows: u128, budget: u64 },

    #[error("window read at {site:?} for record {record} found an uncolored site")]
    UncoloredWindow { site: Site, record: usize },

    #[error("negative increment {value:e} at range {range}")]
    NegativeIncrement { range: i64, value: f64 },

    #[error("alpha({range}) disagrees between forms: {literal} vs {simplified}")]
    AlphaMismatch {
        range: i64,
        literal: f64,
        simplified: f64,
    },

    #[error("knuth-yao draw unresolved after {depth} bits")]
    DepthExceeded { depth: u32 },

    #[error("torus side {side} too small for interaction range {range}")]
    TorusTooSmall { side: usize, range: usize },

    #[error("condition check inconclusive: {0}")]
    Inconclusive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidConfig(_) => "invalid_config",
            Error::BudgetExhausted { .. } => "budget_exhausted",
            Error::EnumerationBudget { .. } => "enumeration_budget",
            Error::UncoloredWindow { .. } => "uncolored_window",
            Error::NegativeIncrement { .. } => "negative_increment",
            Error::AlphaMismatch { .. } => "alpha_mismatch",
            Error::DepthExceeded { .. } => "depth_exceeded",
            Error::TorusTooSmall { .. } => "torus_too_small",
            Error::Inconclusive(_) => "inconclusive",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
