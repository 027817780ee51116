//! Error types shared across the crate.

use thiserror::Error;

use crate::pipeline::{GroupId, HeaderField, NodeId};

/// Errors raised while a switch processes a packet.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    /// A scoped or hashed field is absent from the packet.
    #[error("header field {0} missing from packet")]
    MissingField(HeaderField),
    /// No flow entry matched (surfaced only by the raw match operation;
    /// packet processing converts this per the table-miss policy).
    #[error("no flow entry matched")]
    NoMatch,
    #[error("group {0} does not exist")]
    UnknownGroup(GroupId),
    #[error("group {0} has no buckets")]
    EmptyGroup(GroupId),
    /// A configuration bug observable only at execution time (pop on an
    /// untagged packet, push on a tagged one, set-state without a state
    /// table). Aborts the run.
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("group chain deeper than {0}")]
    GroupDepthExceeded(usize),
}

/// Static configuration problems detected while building tables or scenarios.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid(msg.into())
    }
}

/// Errors from driving a simulation run.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("pipeline error at node {node}: {source}")]
    Pipeline {
        node: NodeId,
        #[source]
        source: PipelineError,
    },
    #[error("no link between {0} and {1}")]
    UnknownLink(NodeId, NodeId),
    #[error("flow {0} not present in the log")]
    UnknownFlow(u64),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
