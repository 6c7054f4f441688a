use thiserror::Error;

use crate::graph::Vertex;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElfsError {
    #[error("edge ({u}, {v}) has non-positive or non-finite weight {weight}")]
    NonPositiveWeight { u: Vertex, v: Vertex, weight: f64 },
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: Vertex, n: usize },
    #[error("sink set is empty")]
    EmptySink,
    #[error("source {0} lies in the sink set")]
    SourceInSink(Vertex),
    #[error("sink set covers the whole graph")]
    SinkIsWholeGraph,
    #[error("vertex {vertex} cannot reach the sink set")]
    Disconnected { vertex: Vertex },
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("oracle mismatch in {what}: discrepancy {discrepancy:e} exceeds {tolerance:e}")]
    OracleMismatch { what: String, discrepancy: f64, tolerance: f64 },
    #[error("identity violated: {what} (lhs {lhs}, rhs {rhs})")]
    IdentityViolation { what: String, lhs: f64, rhs: f64 },
    #[error("step limit of {limit} exceeded")]
    StepLimitExceeded { limit: usize },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid bound: {what} = {supplied} is below the true value {actual}")]
    InvalidBound { what: String, supplied: f64, actual: f64 },
    #[error("keep set is empty")]
    EmptyKeepSet,
    #[error("eliminated block is singular")]
    SingularBlock,
    #[error("vertex {0} is not a cut vertex separating the requested subtrees")]
    NotACutVertex(Vertex),
    #[error("edge endpoint {0} lies in the sink set")]
    EndpointInSink(Vertex),
    #[error("graph is not a tree")]
    NotATree,
    #[error("edge space dimension {dim} exceeds the cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("phase estimation with {bits} bits exceeds the cap {cap}")]
    PrecisionOverflow { bits: u32, cap: u32 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ElfsError>;
