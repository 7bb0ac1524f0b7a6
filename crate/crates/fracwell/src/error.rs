use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular derivative at t = {t:e} (exponent {exponent})")]
    SingularDerivative { t: f64, exponent: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("condition {condition} violated: {detail}")]
    Condition { condition: String, detail: String },
    #[error("bound undefined: {0}")]
    BoundUndefined(String),
    #[error("constructor failure: {0}")]
    Constructor(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn condition(condition: &str, detail: impl Into<String>) -> Self {
        Error::Condition {
            condition: condition.to_string(),
            detail: detail.into(),
        }
    }
}
