use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised while constructing or combining domain objects.
///
/// Invariant violations carry the short name of the broken invariant
/// (`"normalization"`, `"positivity"`, `"effect bound"`, ...) so callers
/// and scenario files can report it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{invariant} violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("unknown outcome label `{0}`")]
    UnknownLabel(String),

    #[error("outcome map is not surjective: label `{0}` is never hit")]
    NonSurjective(String),

    #[error("outcome `{0}` has vanishing probability, updated state undefined")]
    OutcomeNotObserved(String),

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("object `{name}`: {source}")]
    Object {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("dangling reference: `{from}` refers to unknown object `{to}`")]
    DanglingReference { from: String, to: String },

    #[error("object `{name}` has type `{found}`, expected `{expected}`")]
    WrongType {
        name: String,
        expected: &'static str,
        found: String,
    },

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant,
            detail: detail.into(),
        }
    }

    pub(crate) fn dims(detail: impl Into<String>) -> Self {
        Error::DimensionMismatch(detail.into())
    }

    pub(crate) fn in_object(self, name: &str) -> Self {
        Error::Object {
            name: name.to_string(),
            source: Box::new(self),
        }
    }

    /// Name of the violated invariant, looking through object wrappers.
    pub fn invariant_name(&self) -> Option<&'static str> {
        match self {
            Error::Invariant { invariant, .. } => Some(invariant),
            Error::Object { source, .. } => source.invariant_name(),
            _ => None,
        }
    }
}
