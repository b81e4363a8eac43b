use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative value")]
    SqrtOfNegative,
    #[error("index ({i}, {j}) out of range for {rows}x{cols}")]
    IndexOutOfRange { i: usize, j: usize, rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singular diagonal tile {tile} at local row {row}")]
    SingularTile { tile: usize, row: usize },
    #[error("invalid launch: {0}")]
    InvalidLaunch(String),
    #[error("overlapping writes in launch '{stage}' at ({i}, {j})")]
    OverlappingWrites { stage: String, i: usize, j: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("could not generate a well-conditioned triangular matrix after {0} attempts")]
    GenerationFailed(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("round-to-nearest-even self check failed; refusing to run")]
    RoundingModeBroken,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
