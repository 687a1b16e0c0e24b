use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} has no outgoing edge")]
    NoOutgoingEdge { node: usize },

    #[error("edge {edge} both leaves and enters node {node}")]
    ConflictingMarks { edge: usize, node: usize },

    #[error("edge {edge} references node {id}, but the graph has {nodes} nodes")]
    NodeOutOfRange { edge: usize, id: usize, nodes: usize },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("edge {edge} has invalid capacity {value}")]
    InvalidCapacity { edge: usize, value: f64 },

    #[error("power iteration did not converge in {iterations} iterations (relative residual {residual:e})")]
    PowerIterationStalled { iterations: usize, residual: f64 },

    #[error("cost coefficient on edge {edge} must be positive, got {value}")]
    NonPositiveCoefficient { edge: usize, value: f64 },

    #[error("iterative minimizer did not converge in {iterations} iterations (gradient map norm {residual:e})")]
    MinimizerStalled { iterations: usize, residual: f64 },

    #[error("edge {edge} has unbounded capacity")]
    UnboundedBox { edge: usize },

    #[error("interval `{name}` is empty: upper {upper} < lower {lower}")]
    InvalidInterval { name: String, lower: f64, upper: f64 },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("slot {slot}: node {node} is missing a {kind} message from node {from}")]
    MissingMessage {
        slot: u64,
        node: usize,
        from: usize,
        kind: &'static str,
    },

    #[error("dual ascent hit the iteration cap of {iterations} (projected gradient norm {residual:e})")]
    DualSolverStalled { iterations: usize, residual: f64 },

    #[error("slot {slot}: {source}")]
    Slot {
        slot: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_slot(self, slot: u64) -> Self {
        Error::Slot {
            slot,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
