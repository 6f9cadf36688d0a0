use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed record in a line-delimited input. `line` is 1-based.
    #[error("{what}, line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },

    #[error("example {id:?}: gold_index out of range ({gold_index} with {options} options)")]
    GoldIndexOutOfRange {
        id: String,
        gold_index: usize,
        options: usize,
    },

    #[error(
        "predictions line {line}: probabilities for {example_id:?} sum to {sum}, outside 1 ± 1e-3"
    )]
    ProbabilitySum {
        example_id: String,
        line: usize,
        sum: f64,
    },

    #[error("unknown prompt mode {0:?} (expected \"full_prompt\" or \"choices_only\")")]
    UnknownMode(String),

    #[error("embeddings: bad magic, expected \"SMEB1\\n\"")]
    EmbeddingMagic,

    #[error(
        "embeddings: header declares {count}x{dim} floats but payload holds {payload_bytes} bytes"
    )]
    EmbeddingSize {
        count: u64,
        dim: u64,
        payload_bytes: usize,
    },

    #[error("embeddings: manifest lists {manifest} ids but payload holds {count} rows")]
    ManifestLength { count: usize, manifest: usize },

    #[error("embedding for {id:?} is the zero vector")]
    ZeroVector { id: String },

    #[error("vector dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine distance undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("model {model:?} has no {mode} prediction for example {example_id:?}")]
    Coverage {
        model: String,
        mode: &'static str,
        example_id: String,
    },

    #[error("model {model:?}: probability vector for {example_id:?} has length {got}, example has {expected} options")]
    VectorLength {
        model: String,
        example_id: String,
        got: usize,
        expected: usize,
    },

    #[error("at least one {0} prediction set is required")]
    NoModels(&'static str),

    #[error("kernel density estimate needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("kernel bandwidth is zero (all samples equal)")]
    ZeroBandwidth,

    #[error("{0}")]
    Statistic(String),

    #[error("subset size {n} exceeds the {models} available models")]
    SubsetTooLarge { n: usize, models: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("input validation failed with {0} problem(s)")]
    Validation(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            what,
            line,
            message: message.to_string(),
        }
    }

    /// True for failures caused by unreadable or malformed inputs, as opposed
    /// to inputs that parse but cannot be processed.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::DuplicateId { .. }
                | Error::GoldIndexOutOfRange { .. }
                | Error::ProbabilitySum { .. }
                | Error::UnknownMode(_)
                | Error::EmbeddingMagic
                | Error::EmbeddingSize { .. }
                | Error::ManifestLength { .. }
                | Error::ZeroVector { .. }
                | Error::Config(_)
                | Error::SubsetTooLarge { .. }
        )
    }
}
