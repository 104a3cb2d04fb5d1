use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },

    #[error("empty matrix")]
    Empty,

    #[error("entry ({i}, {j}) is not finite")]
    NonFinite { i: usize, j: usize },

    #[error("entry ({i}, {j}) = {value} is negative")]
    NegativeEntry { i: usize, j: usize, value: f64 },

    #[error("row {i} sums to {sum}")]
    RowSumViolation { i: usize, sum: f64 },

    #[error("diagonal entry {i} = {value} is negative")]
    NegativeDiagonal { i: usize, value: f64 },

    #[error("invalid step range: m = {m} < k = {k}")]
    InvalidRange { k: usize, m: usize },

    #[error("power iteration did not converge in {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("component has no cycle")]
    NoCycle,

    #[error("node set is not strongly connected")]
    NotStronglyConnected,

    #[error("node index {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("matrix is not primitive")]
    NotPrimitive,

    #[error("no qualifying step found for k = {k} within cap {cap}")]
    NotFoundWithinCap { k: usize, cap: usize },

    #[error("interaction is not bidirectional at step {k}: w[{i}][{j}] > 0 but w[{j}][{i}] = 0")]
    NotBidirectional { k: usize, i: usize, j: usize },

    #[error("contraction bound violated at k = {k}, m = {m}, i = {i} (slack {slack:e})")]
    ContractionViolated { k: usize, m: usize, i: usize, slack: f64 },

    #[error("horizon too short: have {len} steps, need at least {needed}")]
    HorizonTooShort { len: usize, needed: usize },

    #[error("degenerate set: {0}")]
    DegenerateSet(String),

    #[error("point is not in the set (distance {distance:e})")]
    YNotInSet { distance: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },

    #[error("schema error at `{field}`: {reason}")]
    SchemaError { field: String, reason: String },

    #[error("seed missing at `{field}`")]
    SeedMissing { field: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
