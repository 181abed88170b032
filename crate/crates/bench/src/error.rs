use combworks::CombError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("target {0:?} is neither a scenario nor a readable process file")]
    UnresolvableTarget(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CombError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
