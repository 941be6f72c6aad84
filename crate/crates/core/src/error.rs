use fsipp_sdp::SdpError;

#[derive(Debug, thiserror::Error)]
pub enum FsippError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree overflow: {0}")]
    DegreeOverflow(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("inconsistent case tag: {0}")]
    InconsistentTag(String),
    #[error("functional has degenerate mass L(1) = {0}")]
    DegenerateMass(f64),
    #[error("numerical trouble: {0}")]
    NumericalTrouble(String),
    #[error("no recipe applies: {0}")]
    MissingHint(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("iteration cap reached: {0}")]
    IterationCap(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

pub type Result<T> = std::result::Result<T, FsippError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FsippError::DimensionMismatch { expected, got })
    }
}
