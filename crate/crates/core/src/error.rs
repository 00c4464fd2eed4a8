use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("precision must be at least 1 digit, got {0}")]
    BadPrecision(u32),

    #[error("operands live in different p-adic contexts ({0} vs {1})")]
    ContextMismatch(String, String),

    /// Hensel's simple-root condition fails at the seed: p divides poly'(seed).
    #[error("not liftable: p = {prime} divides the derivative at seed {seed}")]
    NotLiftable { prime: u64, seed: u64 },

    #[error("seed {seed} is not a root of the polynomial mod {prime}")]
    BadSeed { prime: u64, seed: u64 },

    #[error(
        "period m = 2 rejected: f^2(x) = x has no solution except the fixed points \
         (the equation reduces to t^3 = 1)"
    )]
    PeriodTwoRejected,

    #[error("out of regime: {0}")]
    OutOfRegime(String),

    #[error("sampling unsupported: {0}")]
    SamplingUnsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant broken: {0}")]
    Internal(String),
}
