use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SdpError {
    #[error("problem has no variables")]
    Empty,
    #[error("scalar index {index} out of range for variable of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite coefficient in problem data")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("SDPA parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
