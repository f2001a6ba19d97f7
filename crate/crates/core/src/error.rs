//! Crate-wide error type. Every fallible public operation returns
//! [`Result`] so callers can match on the failure kind.

use thiserror::Error;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Reduction over an empty collection.
    #[error("empty reduction")]
    EmptyReduction,

    /// The probed function returned a non-finite value during a gradient check.
    #[error("non-finite probe at coordinate {0}")]
    NonFiniteProbe(usize),

    /// Rank correlation is undefined when one side has zero rank variance.
    #[error("degenerate ranks: {0}")]
    DegenerateRanks(&'static str),

    /// A line of an input file failed to parse. Line numbers start at 1.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty vocabulary: no event survives the frequency filter")]
    EmptyVocabulary,

    #[error("unknown event id {0}")]
    UnknownEvent(usize),

    /// Token sequence with no content tokens between the sentinels.
    #[error("no content tokens")]
    NoContentTokens,

    #[error("event has an empty predicate")]
    EmptyPredicate,

    #[error("contrastive loss requires at least one negative")]
    NoNegatives,

    #[error("log of zero positive weight in literal mode")]
    ZeroWeight,

    /// Parameter outside its mathematical domain, e.g. a non-positive
    /// temperature or a step size outside (0, 1e-2].
    #[error("domain violation: {0}")]
    Domain(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("batch size {batch} exceeds event count {events}")]
    BatchTooLarge { batch: usize, events: usize },

    /// Training aborted on a non-finite loss; the message names the step
    /// and the anchors of the offending batch.
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported checkpoint format version {0}")]
    CheckpointVersion(u32),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Wraps an I/O error with the path or action that produced it.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Wraps a serde_json error with the path or action that produced it.
    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
