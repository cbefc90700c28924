use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the operation's domain.
    Domain(String),
    /// A class level needs more flip seeds than the key chain carries.
    KeyDeficit { requested: usize, available: usize },
    /// Operand shapes do not agree.
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// Input contains NaN or infinity.
    NonFinite(&'static str),
    /// A matrix required to have full row rank does not.
    RankDeficient { rank: usize, required: usize },
    /// A supplied basis fails the orthonormality gate.
    NotOrthonormal { deviation: f64 },
    /// The hypotheses of a bound are violated; the bound says nothing here.
    Inapplicable(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::KeyDeficit {
                requested,
                available,
            } => write!(
                f,
                "key deficit: class needs {requested} flip seeds, key holds {available}"
            ),
            Error::ShapeMismatch { expected, found } => write!(
                f,
                "shape mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::NonFinite(what) => write!(f, "non-finite values in {what}"),
            Error::RankDeficient { rank, required } => {
                write!(f, "rank deficient matrix: rank {rank}, need {required}")
            }
            Error::NotOrthonormal { deviation } => write!(
                f,
                "basis is not orthonormal (relative Frobenius deviation {deviation:.3e})"
            ),
            Error::Inapplicable(msg) => write!(f, "bound inapplicable: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
