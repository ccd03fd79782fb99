use thiserror::Error;

/// Errors produced by sampling, problem construction and the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("likelihood evaluation budget exhausted ({used}/{budget})")]
    BudgetExhausted { used: u64, budget: u64 },

    #[error("constrained sampling stalled: {attempts} consecutive candidates rejected at threshold {threshold}")]
    StallDetected { attempts: u64, threshold: f64 },

    #[error("every initial sample landed on a plateau; plateau evidence is {plateau_evidence}")]
    DegeneratePartition { plateau_evidence: f64 },

    #[error("model has no analytic survival function")]
    MissingSurvival,

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("quadrature did not converge on [{lo}, {hi}] within the subdivision limit")]
    QuadratureNonConvergence { lo: f64, hi: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
