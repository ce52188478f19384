use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown model `{0}` (expected lorenz63, lorenz96, sawtooth or ks)")]
    UnknownModel(String),
    #[error("unknown parameter `{name}` for model `{model}`")]
    UnknownParameter { model: String, name: String },
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("state left the finite range at step {step}")]
    NonFinite { step: usize },
    #[error("rank-deficient tangent basis at step {step}, column {column}")]
    RankDeficient { step: usize, column: usize },
    #[error("flow vector vanishes: trajectory sits on a fixed point")]
    FixedPoint,
    #[error("unstable/center tangency: Schur complement is singular (1 - |Q^T f|^2/|f|^2 = {0:.3e})")]
    Tangency(f64),
    #[error("no samples accumulated")]
    NoSamples,
    #[error("ill-conditioned polynomial fit: {0}")]
    IllConditioned(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
