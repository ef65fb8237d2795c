use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("illegal move {move_label} in state {state}")]
    IllegalMove { move_label: String, state: String },

    #[error("move sequence violates the redundancy policy at step {step} ({move_label})")]
    RedundantSequence { step: usize, move_label: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("train-mode forward needs a batch of at least 2, got {0}")]
    BatchTooSmall(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient in tensor {tensor} at step {step}")]
    NonFiniteGradient { tensor: String, step: u64 },

    #[error("state space exceeds budget of {budget} states")]
    StateSpaceTooLarge { budget: usize },

    #[error("search budget of {budget} nodes exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("lights-out system is inconsistent: state is unsolvable")]
    Unsolvable,

    #[error("kernel dimension {nullity} exceeds the enumeration cap of {cap}")]
    NullityTooLarge { nullity: usize, cap: usize },

    #[error("no oracle distance available for case {0}")]
    MissingOracle(String),

    #[error("optimality rate over an empty result set is undefined")]
    EmptyResults,

    #[error("scaling fit needs at least {need} observations, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("scaling fit diverged from every grid initialization")]
    FitDiverged,

    #[error("checkpoint format error: {0}")]
    BadCheckpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
