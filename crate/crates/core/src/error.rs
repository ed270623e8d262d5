use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown node type {0:?} (expected \"drug\" or \"gene\")")]
    UnknownNodeType(String),
    #[error("edge {0} -- {1} connects two drug nodes")]
    DrugDrugEdge(String, String),
    #[error("self-loop on node {0}")]
    SelfLoop(String),
    #[error("node {id} appears with conflicting types")]
    ConflictingNodeType { id: String },
    #[error("input contains no rows")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown drug {0}")]
    UnknownDrug(String),
    #[error("node {0} in a target pair is not a drug")]
    NonDrugNodeInPair(String),
    #[error("pair ({0}, {1}) appears with both labels")]
    ConflictingDuplicateLabel(String, String),
    #[error("label must be 0 or 1, got {0:?}")]
    InvalidLabel(String),
    #[error("matrix has no nonzero entries")]
    EmptyMatrix,
    #[error("target table is empty")]
    EmptyTargets,
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("feature width mismatch: model expects {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("labels contain no positives")]
    NoPositives,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed input {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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

    /// True for errors caused by bad input data or configuration, as opposed
    /// to failures of the environment (disk, serialization).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Json(_))
            && !matches!(self, Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound)
    }
}
