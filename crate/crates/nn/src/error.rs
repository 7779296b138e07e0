use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {lhs} vs {rhs}")]
    Shape {
        op: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("softmax row {0} is fully masked")]
    FullyMasked(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("duplicate parameter name: {0}")]
    DuplicateParam(String),
    #[error("unknown parameter: {0}")]
    UnknownParam(String),
}

pub type Result<T> = std::result::Result<T, NnError>;
