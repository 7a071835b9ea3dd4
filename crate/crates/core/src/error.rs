use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid denominator: q must be at least 1")]
    InvalidDenominator,

    #[error("invalid field: {0} is not an admissible prime")]
    InvalidField(u64),

    #[error("invalid numerator: gcd({numerator}, {p}) != 1")]
    InvalidNumerator { numerator: u64, p: u64 },

    #[error("invalid scalar: lambda must be nonzero mod p")]
    InvalidScalar,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("x -> x^{d} does not permute F_{p} (gcd(d, p-1) != 1)")]
    NotAPermutation { d: u32, p: u64 },

    #[error("binomial coefficients may vanish mod {p} because p <= d = {d}")]
    BinomialVanishing { d: u32, p: u64 },

    #[error("resource limit: {entries} table entries exceed the cap of {cap}")]
    ResourceLimit { entries: u128, cap: u64 },

    #[error("beta_d and kappa_d are only defined for d >= 3 (got {0})")]
    UndefinedForDegree(u32),

    #[error("prime too small: {0}")]
    PrimeTooSmall(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid schedule at level {level}: {reason}")]
    InvalidSchedule { level: usize, reason: String },

    #[error("box counting needs at least 3 scales spanning a factor of 10 (got {0})")]
    TooFewScales(String),

    #[error("no large-sum witness found at level {level}: {reason}")]
    WitnessNotFound { level: usize, reason: String },

    #[error("checksum mismatch in table cache")]
    ChecksumMismatch,

    #[error("malformed table cache: {0}")]
    MalformedCache(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
