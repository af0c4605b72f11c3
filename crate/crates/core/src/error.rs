use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("resource cap exceeded: {what} would need {needed} entries, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("random generation failed: {0}")]
    Generation(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("inaccurate certificate: primal {primal:.12}, dual {dual:.12}, gap {gap:.3e}")]
    InaccurateCertificate { primal: f64, dual: f64, gap: f64 },

    #[error("degenerate certificate: {0}")]
    DegenerateCertificate(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
