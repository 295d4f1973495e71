use nlpre_core::eval::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("gold file for dataset '{0}' is missing")]
    MissingGold(String),
    #[error("gold file for dataset '{dataset}' is invalid ({detail})")]
    InvalidGold { dataset: String, detail: String },
    #[error("content page '{0}' is missing")]
    MissingPage(String),
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("archive exceeds the upload limit of {limit} bytes")]
    TooLarge { limit: u64 },
    #[error("upload is not a ZIP archive")]
    NotAZip,
    #[error("identical archive already evaluated as submission {existing_id}")]
    DuplicateArchive { existing_id: String },
    /// Also returned for unknown ids so that ids cannot be probed.
    #[error("submission not found or access token invalid")]
    WrongToken,
    #[error("submission is {actual}, expected {expected}")]
    WrongState { expected: String, actual: String },
    #[error("unknown tagset '{0}'")]
    UnknownTagset(String),
    #[error("unknown dataset '{0}'")]
    UnknownDataset(String),
    #[error("unknown page '{0}'")]
    UnknownPage(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("evaluation failed: {0}")]
    Engine(#[from] EvalError),
    #[error("storage error: {0}")]
    Store(#[from] rusqlite::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("analytics: {0}")]
    Analytics(#[from] nlpre_core::analytics::AnalyticsError),
}

impl ServiceError {
    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Config(_) => "ConfigError",
            ServiceError::TooLarge { .. } => "TooLarge",
            ServiceError::NotAZip => "NotAZip",
            ServiceError::DuplicateArchive { .. } => "DuplicateArchive",
            ServiceError::WrongToken => "WrongToken",
            ServiceError::WrongState { .. } => "WrongState",
            ServiceError::UnknownTagset(_) => "UnknownTagset",
            ServiceError::UnknownDataset(_) => "UnknownDataset",
            ServiceError::UnknownPage(_) => "UnknownPage",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Engine(_) => "EngineError",
            ServiceError::Store(_) | ServiceError::Io(_) => "InternalError",
            ServiceError::Analytics(_) => "AnalyticsError",
        }
    }
}
