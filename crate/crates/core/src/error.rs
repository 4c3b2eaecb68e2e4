use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("belief has {belief} entries but the model has {states} states")]
    SizeMismatch { belief: usize, states: usize },

    /// The observation has probability zero under the predicted belief.
    #[error("observation has zero probability under the predicted belief")]
    ZeroNormalizer,

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("no actions available")]
    NoActions,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("agent model nesting depth {depth} exceeds cap {cap}")]
    DepthExceeded { depth: usize, cap: usize },

    #[error("agent model is not grounded: {0}")]
    Ungrounded(String),

    #[error("every branch fell below the prune threshold")]
    AllPruned,

    #[error("particle weights collapsed to zero")]
    ParticleCollapse,

    #[error("unknown state component {0}")]
    UnknownComponent(String),

    #[error("oracle guard rail: {0}")]
    GuardRail(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },

    #[error("seed {seed}: {source}")]
    AtSeed { seed: u64, source: Box<Error> },

    #[error("not the {expected} turn")]
    Turn { expected: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
