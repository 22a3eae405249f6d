use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("requirement set is empty")]
    EmptyRequirementSet,
    #[error("number of versions must be at least 1, got {0}")]
    InvalidVersions(usize),
    #[error("annotation needs at least 2 instances, got {0}")]
    TooFewInstances(usize),
    #[error("prompt has {size} characters, budget is {budget}")]
    PromptBudgetExceeded { size: usize, budget: usize },
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("HTTP status {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("gave up after {attempts} attempts; last error: {last}")]
    ExhaustedRetries {
        attempts: u32,
        last_status: Option<u16>,
        last: String,
    },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("no JSON value found in response")]
    NoJsonFound,
    #[error("response contains {0} candidate JSON values")]
    AmbiguousJson(usize),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("requirement indices do not cover the set (missing {missing:?}, duplicated {duplicated:?}, out of range {out_of_range:?})")]
    IndexCoverage {
        missing: Vec<usize>,
        duplicated: Vec<usize>,
        out_of_range: Vec<i64>,
    },
    #[error("ranking is not a permutation of the instances (missing {missing:?}, extra {extra:?})")]
    NotAPermutation { missing: Vec<String>, extra: Vec<String> },
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error("mock provider: {0}")]
    Mock(String),
}

impl GatewayError {
    /// Failures that merit another attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Timeout(_) | GatewayError::Transport(_) => true,
            GatewayError::HttpError { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
