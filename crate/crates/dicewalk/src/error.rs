use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A precondition on an argument was violated (bad die, bad range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A factorization-based predicate was asked about an integer beyond the
    /// sieve limit. The caller owns sieve sizing and must rebuild.
    #[error("sieve too small: n = {n} exceeds limit {limit}")]
    SieveTooSmall { n: u64, limit: u64 },

    /// The starting sum already satisfies the predicate and the trivial-start
    /// override was not set.
    #[error("starting sum {init} already satisfies the predicate (pass allow_trivial_start to accept a zero-length game)")]
    TrivialStart { init: u64 },

    /// No trial ever terminated, so conditional statistics are undefined.
    #[error("no hits occurred within the executed rounds; conditional statistics are undefined")]
    NoHits,

    /// A tail-target or prefix-stability search ran out of its round budget.
    /// `detail` describes the state when the search gave up (survivor mass,
    /// partial prefix).
    #[error("not converged within {r_max} rounds ({detail})")]
    NotConverged { r_max: u32, detail: String },
}

impl Error {
    pub fn invalid<S: Into<String>>(msg: S) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Stable machine-readable tag, used by the CLI for error objects and
    /// exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SieveTooSmall { .. } => "sieve-too-small",
            Error::TrivialStart { .. } => "invalid-start",
            Error::NoHits => "no-hits",
            Error::NotConverged { .. } => "not-converged",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
