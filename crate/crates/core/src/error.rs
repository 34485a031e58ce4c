use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("value exceeds width: {value} does not fit in {width} bits")]
    ValueExceedsWidth { value: u64, width: u32 },
    #[error("insufficient moduli: product {product} is below twice the bound {bound}")]
    InsufficientModuli { product: u128, bound: u128 },
    #[error("moduli are not pairwise distinct primes")]
    ModuliNotCoprime,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {dim} exceeds the {algorithm} bound of {max}")]
    DimensionTooLarge {
        dim: usize,
        max: usize,
        algorithm: &'static str,
    },
    #[error("modulus too small for identity: p = {p} must exceed {min}")]
    ModulusTooSmall { p: u64, min: u64 },
    #[error("wrong number of values: expected {expected}, found {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown oracle kind `{0}`")]
    UnknownOracle(String),
    #[error("malformed sample set: {0}")]
    MalformedSamples(String),
    #[error("learner desynchronized: permanent learning never returned m = {expected} in {attempts} attempts")]
    LearnerDesynchronized { expected: usize, attempts: usize },
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("no admissible prime at or below {0}")]
    NoAdmissiblePrime(u64),
    #[error("instance length {n} too small: need at least {min} bits")]
    LengthTooSmall { n: usize, min: usize },
    #[error("bank incomplete: {0}")]
    BankIncomplete(String),
    #[error("rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("inconsistent sample set: no key reproduces every label")]
    InconsistentSamples,
    #[error("point is not a member of the sample space")]
    NonMember,
    #[error("malformed artifact: {0}")]
    MalformedArtifact(String),
    #[error("oracle protocol: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
