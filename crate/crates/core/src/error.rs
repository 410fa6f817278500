use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration failed at s = {s}: {reason}")]
    Integration { s: f64, reason: String },

    #[error("accuracy failure: energy drift {drift:e} exceeds {limit:e}")]
    Accuracy { drift: f64, limit: f64 },

    #[error("escape not certified within s_max = {s_max} (reached |z| = {radius})")]
    NotEscaped { s_max: f64, radius: f64 },

    #[error("asymptotic model violated: fitted decay exponent {0}")]
    AsymptoticModel(f64),

    #[error("outside shooting domain: {0}")]
    OutsideShootingDomain(String),

    #[error("degenerate contact factor {0:e}")]
    DegenerateContact(f64),

    #[error("non-finite field value after step {step}")]
    NonFinite { step: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
