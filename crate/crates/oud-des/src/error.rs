use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no real root: z^2 - 4c = {0}")]
    NoRealRoot(f64),
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),
    #[error("truncated sampling gave up after {0} attempts")]
    TruncationCap(u32),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("rank deficient design matrix")]
    RankDeficient,
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<crate::scenario::ValidationError>),
    #[error("{0}")]
    Input(String),
    #[error("engine invariant violated: {0}")]
    Engine(String),
    #[error("sensitivity point {point}: {source}")]
    AtPoint {
        point: usize,
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

pub type Result<T> = std::result::Result<T, Error>;
