use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("variable count mismatch: {left} vs {right}")]
    NvarsMismatch { left: usize, right: usize },
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },
    #[error("truncation order exhausted: {0}")]
    OrderExhausted(String),
    #[error("variable pairing is not an involution of 0..{0}")]
    NotAnInvolution(usize),
    #[error("substitution has a nonzero constant term into an order-limited series")]
    NonzeroConstantSubstitution,
    #[error("expected {expected} substitutions, got {got}")]
    SubstitutionArity { expected: usize, got: usize },
    #[error("series has zero constant term and is not a unit")]
    NotAUnit,
    #[error("an exact polynomial with non-constant terms has no exact inverse; truncate first")]
    UnboundedInverse,
    #[error("series is not an exact polynomial")]
    NotPolynomial,
    #[error("too many variables: {0} (max {max})", max = crate::multiindex::MAX_VARS)]
    TooManyVariables(usize),
    #[error("not a hypersurface point: {0}")]
    NotAHypersurfacePoint(String),
    #[error("defining function is not real-valued")]
    NotReal,
    #[error("singular system: {0}")]
    Singular(String),
    #[error("inconsistent linear system: {0}")]
    Inconsistent(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("map does not send the source into the target: {0}")]
    NotTangent(String),
    #[error("map is not CR: {0}")]
    NotCr(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("right-hand side evaluated outside its domain at {0}")]
    OutsideDomain(String),
    #[error("non-finite value encountered at {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
