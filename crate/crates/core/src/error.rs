use thiserror::Error;

/// Errors produced by solvers, builders, and the simulator.
///
/// `InvalidInput` covers malformed instances (non-finite numbers, structural
/// sign violations, schema problems) and is distinct from `AssumptionFailed`,
/// which reports a well-formed instance that falls outside the model's
/// standing assumptions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assumption violated: {check} ({detail})")]
    AssumptionFailed { check: String, detail: String },

    #[error("deterministic limit has no increasing fundamental solution")]
    NoIncreasingSolution,

    #[error(
        "threshold not bracketed on [{lo}, {hi}]: N({lo}) = {n_lo:e}, N({hi}) = {n_hi:e}"
    )]
    ThresholdNotBracketed { lo: f64, hi: f64, n_lo: f64, n_hi: f64 },

    #[error(
        "no regular-control MPE exists under asymmetry: player thresholds {theta_i} and {theta_j} differ"
    )]
    AsymmetricPlayers { theta_i: f64, theta_j: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("simulation failed at step {step}: {detail}")]
    Simulation { step: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
