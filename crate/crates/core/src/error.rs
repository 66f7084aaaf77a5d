use thiserror::Error;

/// Errors raised by the algebra, channel, supermap and realisation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("operator is not positive semidefinite (block {block}, eigenvalue {eigenvalue:e})")]
    NotPsd { block: usize, eigenvalue: f64 },

    #[error("map is not completely positive (choi block {block}, eigenvalue {eigenvalue:e})")]
    NotCp { block: usize, eigenvalue: f64 },

    #[error("map is not trace preserving (max residual {residual:e})")]
    NotTp { residual: f64 },

    #[error("map is not unital (residual {residual:e})")]
    NotUnital { residual: f64 },

    #[error("target algebra carries no pair structure")]
    StructureMissing,

    #[error("supermap has not been verified as deterministic")]
    VerifyRequired,

    #[error("dilation is not minimal: {0}")]
    NotMinimal(String),

    #[error("dilation mismatch: residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("environment dimension {dim} exceeds bound {bound} at ({source_block}, {target_block})")]
    BoundViolated {
        source_block: usize,
        target_block: usize,
        dim: usize,
        bound: usize,
    },

    #[error("W is not an isometry: defect {defect:e}")]
    IsometryDefect { defect: f64 },

    #[error("singular marginal while sampling a random channel")]
    SingularMarginal,

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
