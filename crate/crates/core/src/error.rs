use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("noise-free scoring (sigma2 = 0) requires uniform priors")]
    NoiseFreeWithPriors,

    #[error("instance too large for enumeration: {subsets} subsets exceeds {limit}")]
    TooLarge { subsets: u128, limit: u128 },

    #[error("config: {0}")]
    Config(String),

    #[error("trial failed (algorithm {algorithm}, K={k}, trial {trial}): {source}")]
    Trial {
        algorithm: String,
        k: usize,
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
