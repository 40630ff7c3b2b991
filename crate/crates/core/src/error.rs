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

    #[error("{path}:{position}: {message}")]
    Parse {
        path: PathBuf,
        /// Line number for text formats, record number for binary ones.
        position: String,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("vertex {vertex} does not belong to any triangle")]
    IsolatedVertex { vertex: usize },

    #[error("vertex index {index} out of range ({len} vertices)")]
    VertexOutOfRange { index: usize, len: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("neighbourhood of vertex {vertex} has {count} points, at least 6 are required")]
    SparseNeighbourhood { vertex: usize, count: usize },

    #[error("rank-deficient patch fit at vertex {vertex}")]
    RankDeficient { vertex: usize },

    #[error("landmarks {0} and {1} are not connected inside the local region")]
    Disconnected(String, String),

    #[error("plane cut at gamma = {gamma:.6} rad does not join the landmarks: {reason}")]
    NoCut { gamma: f64, reason: String },

    #[error("query ({x}, {y}) lies outside the triangulation; nearest boundary point ({nx}, {ny})")]
    OutsideHull { x: f64, y: f64, nx: f64, ny: f64 },

    #[error("ridge points at grid indices {indices:?} fall outside the flattened domain")]
    BackMap { indices: Vec<usize> },

    #[error("value {value} outside domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("smoothing parameter search failed: target edf {target} outside achievable range [{min_edf:.3}, {max_edf:.3}]")]
    EdfBracket {
        target: f64,
        min_edf: f64,
        max_edf: f64,
    },

    #[error("optimisation failed: {0}")]
    Optimisation(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown landmark '{0}'")]
    UnknownLandmark(String),

    #[error("sample '{sample}': {source}")]
    Sample {
        sample: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// The innermost error beneath any sample or context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } | Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}
