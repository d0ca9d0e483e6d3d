use thiserror::Error;

use crate::agent::{AgentId, AgentKind};
use crate::value::PropType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("record key `{0}` is not present in the agent defaults")]
    MissingRecordKey(String),

    #[error("property `{0}` is missing")]
    MissingProp(String),

    #[error("property `{key}` holds {found}, expected {expected}")]
    WrongType {
        key: String,
        expected: PropType,
        found: PropType,
    },

    #[error("property `{key}` cannot change type from {from} to {to}")]
    TypeChange {
        key: String,
        from: PropType,
        to: PropType,
    },

    #[error("grid agents need integer positions, got {0:?}")]
    NonIntegralGridPos(Vec<f64>),

    #[error("position {pos:?} is outside the space bounds {size:?}")]
    OutOfBounds { pos: Vec<f64>, size: Vec<usize> },

    #[error("{kind:?} agents cannot live in a {space} space")]
    KindMismatch { kind: AgentKind, space: &'static str },

    #[error("`{0}` requires a Mortal model")]
    StaticModel(&'static str),

    #[error("`{0}` is not allowed on a static graph")]
    StaticGraph(&'static str),

    #[error("`{0}` requires a spatial (2D/3D) model")]
    NotSpatial(&'static str),

    #[error("`{0}` requires a graph model")]
    NotGraph(&'static str),

    #[error("`{0}` requires a grid agent")]
    NotGridAgent(&'static str),

    #[error("no empty patch is left in the space")]
    NoEmptyPatch,

    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("unknown node {0}")]
    UnknownNode(u64),

    #[error("self-loop on node {0} is not allowed in a simple graph")]
    SelfLoop(u64),

    #[error("model has not been initialised")]
    NotInitialised,

    #[error("initialiser failed: {0}")]
    InitFailed(#[source] Box<Error>),

    #[error("step rule failed at step {step}: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("tick {tick} is outside the recorded range 0..={last}")]
    TickOutOfRange { tick: u64, last: u64 },

    #[error("probe failed at tick {tick} on entity {id}: {source}")]
    Probe {
        tick: u64,
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown model `{name}` (available: {available})")]
    UnknownModel { name: String, available: String },

    #[error("unknown parameter `{key}` (valid: {valid})")]
    UnknownParam { key: String, valid: String },

    /// Failure raised from user code inside an initialiser or step rule.
    #[error("{0}")]
    Rule(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("gif encoding: {0}")]
    Gif(#[from] gif::EncodingError),
}

impl Error {
    pub fn rule(msg: impl Into<String>) -> Error {
        Error::Rule(msg.into())
    }
}
