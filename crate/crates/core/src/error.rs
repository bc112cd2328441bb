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

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected {expected} vector components, found {found}")]
    Dimensionality {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: duplicate word {word:?}")]
    DuplicateWord { word: String, line: usize },

    #[error("word {word:?} has a zero-norm vector")]
    ZeroNorm { word: String },

    #[error("embedding rows have no variance; no principal direction exists")]
    DegenerateVariance,

    #[error("embedding space {language:?} has not been fully preprocessed")]
    NotPreprocessed { language: String },

    #[error("lexicon is missing a `word,<dimension>...` header")]
    MissingHeader,

    #[error("lexicon contains no entries")]
    EmptyLexicon,

    #[error("line {line}, column {column:?}: score {value:?} is not a finite number")]
    NonNumericScore {
        line: usize,
        column: String,
        value: String,
    },

    #[error("dimension {0:?} is not declared by the lexicon")]
    UnknownDimension(String),

    #[error("values have zero variance")]
    ZeroVariance,

    #[error("{language}/{dimension}: {n} joined words is below the floor of {floor}")]
    TooFewSamples {
        language: String,
        dimension: String,
        n: usize,
        floor: usize,
    },

    #[error("columns {columns:?} have standard deviation below the guard")]
    ConstantColumns { columns: Vec<usize> },

    #[error("labels carry no covariance with the embedding columns")]
    DegenerateGradient,

    #[error("requested {requested} PLS components but at most {max} are allowed")]
    InvalidComponents { requested: usize, max: usize },

    #[error("requested {requested} PLS components but only {achievable} could be extracted")]
    ComponentsExhausted { requested: usize, achievable: usize },

    #[error("split {split} failed: {source}")]
    SplitFailed {
        split: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("replicate {replicate} stayed degenerate after {attempts} attempts: {last}")]
    RetriesExhausted {
        replicate: usize,
        attempts: usize,
        last: Box<Error>,
    },

    #[error("gradients coincide (|delta| = {norm:e})")]
    CoincidentGradients { norm: f64 },

    #[error("requested {requested} candidates from a vocabulary of {available}")]
    TooManyCandidates { requested: usize, available: usize },

    #[error("candidate vectors have no dispersion; clustering is undefined")]
    DegenerateClusters,

    #[error("cluster centroid has zero norm")]
    ZeroCentroid,

    #[error("k-means left an empty cluster after {attempts} seedings")]
    EmptyCluster { attempts: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure stems from statistically degenerate data rather
    /// than malformed input.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Error::ZeroNorm { .. }
            | Error::DegenerateVariance
            | Error::ZeroVariance
            | Error::TooFewSamples { .. }
            | Error::ConstantColumns { .. }
            | Error::DegenerateGradient
            | Error::ComponentsExhausted { .. }
            | Error::RetriesExhausted { .. }
            | Error::CoincidentGradients { .. }
            | Error::DegenerateClusters
            | Error::ZeroCentroid
            | Error::EmptyCluster { .. } => true,
            Error::SplitFailed { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }

    /// Degeneracies a resampling loop may recover from by redrawing.
    pub(crate) fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::ZeroVariance | Error::ConstantColumns { .. } | Error::DegenerateGradient
        )
    }
}
