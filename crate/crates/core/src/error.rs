use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("calibration infeasible: alpha={alpha} leaves k=floor((1-alpha)*{trials}) = 0")]
    CalibrationInfeasible { alpha: f64, trials: u64 },

    #[error("n={n} too large for exhaustive enumeration (max {max})")]
    ExhaustiveTooLarge { n: u64, max: u64 },

    #[error(
        "(n={n}, alpha={alpha}) is outside the reference table \
         (n <= 3000000, alpha >= 0.01); use simulation or the upper-bound formula"
    )]
    OutOfTable { n: u64, alpha: f64 },

    #[error("expected sample size is infinite for margin {margin}")]
    InfiniteExpectation { margin: f64 },

    #[error("ballot {0} was already drawn")]
    DuplicateDraw(String),

    #[error("ballot {0} has no contest still under audit")]
    NotEligible(String),

    #[error("ballot {got} was not announced (expected {})", expected.as_deref().unwrap_or("none"))]
    NotAnnounced { expected: Option<String>, got: String },

    #[error("no eligible ballots remain")]
    Exhausted,

    #[error("contest {contest_id} has not been fully counted ({drawn} of {n} ballots drawn)")]
    NotExhausted { contest_id: String, drawn: u64, n: u64 },

    #[error("unknown contest {0}")]
    UnknownContest(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
