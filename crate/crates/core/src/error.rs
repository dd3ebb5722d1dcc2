use thiserror::Error;

/// Errors shared across the library. "Soft" outcomes (no solution of a
/// linear system, no mapping automorphism found) are values, not errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular")]
    SingularMatrix,

    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),

    #[error("unsupported size for target `{target}`: {detail}")]
    UnsupportedSize { target: &'static str, detail: String },

    #[error("subspace dimension {0} too large to enumerate")]
    DimensionTooLarge(usize),

    #[error("subspace has no rank-one basis covering the target")]
    NotDecomposable,

    #[error("element does not lie in the span of the given basis")]
    NotInSpan,

    #[error("group closure would exceed the cap of {cap} elements")]
    CapExceeded { cap: usize },

    #[error("claimed subgroup is not contained in the group")]
    NotSubgroup,

    #[error("omega table for d={d} not available in the store")]
    MissingOmega { d: usize },

    #[error("corrupt omega file: {0}")]
    CorruptFile(String),

    #[error("need at least two recorded depth levels to extrapolate")]
    InsufficientData,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed decomposition file: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
