use alloc::string::String;

use crate::fringes::FringeModel;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensity(String),

    #[error("fidelity has a non-negligible imaginary part ({0:e})")]
    ComplexFidelity(f64),

    #[error("measurement set is rank deficient (rank {rank} of {required})")]
    RankDeficient { rank: usize, required: usize },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("fringe fit did not converge after {iterations} iterations (last iterate V = {:.6})", last.visibility)]
    FitDidNotConverge { iterations: usize, last: FringeModel },

    #[error("optimizer exhausted its budget of {evaluations} evaluations (objective {objective:e}, gradient norm {gradient_norm:e})")]
    OptimizerBudget {
        evaluations: usize,
        objective: f64,
        gradient_norm: f64,
    },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("coincidence window {window_s:e} s is not shorter than the pulse period {period_s:e} s")]
    WindowTooLong { window_s: f64, period_s: f64 },

    #[error("{failed} of {runs} Monte Carlo runs failed")]
    MonteCarloFailures { failed: usize, runs: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
