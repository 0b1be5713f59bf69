use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // graphs
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge `{0} -> {1}`")]
    DuplicateEdge(String, String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("graph contains a cycle through `{0}`")]
    Cycle(String),
    #[error("node sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("empty node set: {0}")]
    EmptySet(&'static str),
    #[error("invalid role assignment: {0}")]
    InvalidRoles(String),
    #[error("unknown builtin graph `{0}`")]
    UnknownGraph(String),
    #[error("edge list line {line}: {msg}")]
    EdgeListSyntax { line: usize, msg: String },

    // numerics
    #[error("design matrix has {rows} rows but needs at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("rank-deficient design")]
    RankDeficient,
    #[error("response contains a single class")]
    SingleClass,
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("feature names do not match the fitted model: expected {expected:?}, got {got:?}")]
    NameMismatch { expected: Vec<String>, got: Vec<String> },

    // data
    #[error("column `{0}` is not binary (found {1})")]
    NotBinary(String, f64),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("missing feature block `{0}`")]
    MissingBlock(String),
    #[error("dataset has no oracle U column")]
    MissingOracle,
    #[error("dataset has no `{0}` proxy column")]
    MissingProxy(&'static str),
    #[error("degenerate proxy `{0}`: column is constant")]
    DegenerateProxy(String),
    #[error("covariate `{name}` is not standardized (mean {mean:.4}, sd {sd:.4})")]
    Unstandardized { name: String, mean: f64, sd: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    // estimation
    #[error("2x2 table has an empty cell (n11={n11}, n10={n10}, n01={n01}, n00={n00})")]
    ZeroCell { n11: usize, n10: usize, n01: usize, n00: usize },
    #[error("{failed} of {total} bootstrap replicates failed (limit 10%)")]
    TooManyFailedReplicates { failed: usize, total: usize },
    #[error("sample split too small: {0}")]
    SplitTooSmall(String),
    #[error("W and Z come from the same source `{0}`; pass allow_same_source to do this deliberately")]
    SameProxySource(String),

    // io
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse { path: PathBuf, row: usize, column: String, value: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
