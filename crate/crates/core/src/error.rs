use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model construction, enumeration, learning and the
/// experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layer structure mismatch: {0}")]
    LayerMismatch(String),

    #[error("transition row (h={layer}, s={state}, a={action}) sums to {sum}, expected 1")]
    NonStochasticRow {
        layer: usize,
        state: usize,
        action: usize,
        sum: f64,
    },

    #[error("negative or non-finite probability at (h={layer}, s={state}, a={action}, next={next})")]
    InvalidProbability {
        layer: usize,
        state: usize,
        action: usize,
        next: usize,
    },

    #[error("reward {value} at (h={layer}, s={state}, a={action}) outside [{lo}, {hi}]")]
    RewardOutOfRange {
        layer: usize,
        state: usize,
        action: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("total trajectory reward range [{min}, {max}] exceeds [{lo}, {hi}]")]
    TotalRewardOutOfRange { min: f64, max: f64, lo: f64, hi: f64 },

    #[error("policy row at (h={layer}, s={state}) is not a probability vector (sum {sum})")]
    InvalidPolicyRow { layer: usize, state: usize, sum: f64 },

    #[error("trajectory is inconsistent with the MDP: {0}")]
    InvalidTrajectory(String),

    #[error("enumeration cap of {cap} exceeded ({what})")]
    CapExceeded { cap: usize, what: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty class")]
    EmptyClass,

    #[error("reward model undefined at (h={layer}, s={state}, a={action})")]
    UndefinedReward {
        layer: usize,
        state: usize,
        action: usize,
    },

    #[error("operation requires deterministic transitions")]
    StochasticTransitions,

    #[error("every model assigns zero likelihood to the data")]
    AllModelsExcluded,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("cannot resolve spec file {}: {reason}", path.display())]
    UnresolvableSpec { path: PathBuf, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("rate fit requires at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("rate fit requires positive errors, got {0}")]
    NonPositiveError(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, printed by the command-line runner.
    pub fn code(&self) -> &'static str {
        match self {
            Error::LayerMismatch(_)
            | Error::NonStochasticRow { .. }
            | Error::InvalidProbability { .. }
            | Error::RewardOutOfRange { .. }
            | Error::TotalRewardOutOfRange { .. }
            | Error::InvalidPolicyRow { .. }
            | Error::InvalidTrajectory(_) => "E_INVALID_MODEL",
            Error::CapExceeded { .. } => "E_CAP_EXCEEDED",
            Error::EmptyDataset | Error::EmptyClass => "E_EMPTY_INPUT",
            Error::UndefinedReward { .. } => "E_UNDEFINED_REWARD",
            Error::StochasticTransitions => "E_STOCHASTIC_TRANSITIONS",
            Error::AllModelsExcluded => "E_ALL_MODELS_EXCLUDED",
            Error::InvalidArgument(_) => "E_INVALID_ARGUMENT",
            Error::Parse(_) => "E_PARSE",
            Error::UnknownExperiment(_) => "E_UNKNOWN_EXPERIMENT",
            Error::UnresolvableSpec { .. } => "E_UNRESOLVABLE_SPEC",
            Error::InvalidConfig(_) => "E_INVALID_CONFIG",
            Error::TooFewPoints(_) | Error::NonPositiveError(_) => "E_RATE_FIT",
            Error::Io(_) => "E_IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
