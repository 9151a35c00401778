use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("node id must be non-empty")]
    EmptyNodeId,

    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),

    #[error("duplicate edge `{from}` -> `{to}`")]
    DuplicateEdge { from: NodeId, to: NodeId },

    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),

    #[error("relevance {value} on edge `{from}` -> `{to}` is outside [0, 1]")]
    RelevanceOutOfRange {
        from: NodeId,
        to: NodeId,
        value: String,
    },

    #[error("edge `{from}` -> `{to}` carries a relevance but `{to}` is not a directive")]
    RelevanceOnNonDirective { from: NodeId, to: NodeId },

    #[error("invalid relevance `{0}`")]
    InvalidRelevance(String),

    #[error("graph contains a cycle")]
    Cyclic,

    #[error("cohesion is not applicable to directive `{0}`")]
    CohesionOfDirective(NodeId),

    #[error("cohesion of `{0}` is undefined (no children or missing relevance below it)")]
    CohesionUndefined(NodeId),

    #[error("no undirected path between `{0}` and `{1}`")]
    Disconnected(NodeId, NodeId),

    #[error("`{0}` is not a directive")]
    NotDirective(NodeId),

    #[error("`{0}` is not a function node")]
    NotFunction(NodeId),

    #[error("coupling requires two distinct nodes, got `{0}` twice")]
    SameNode(NodeId),

    #[error("directive `{directive}` is not in the owner set")]
    NotInOwnerSet { directive: NodeId },

    #[error("capability `{0}` owns no directives")]
    EmptyResolvedSet(NodeId),

    #[error("directive `{directive}` is reached by `{first}` and `{second}` through the same parent `{parent}`")]
    UnresolvableSharing {
        directive: NodeId,
        parent: NodeId,
        first: NodeId,
        second: NodeId,
    },

    #[error("directive `{0}` is not covered by any slice member")]
    Uncovered(NodeId),

    #[error("`{0}` is not a member of the membership map")]
    NotAMember(NodeId),

    #[error("graph has {count} internal nodes, above the cap of {cap}")]
    NodeCapExceeded { count: usize, cap: usize },

    #[error("cannot rank an empty slice list")]
    EmptyRanking,

    #[error("ranking inputs differ in length ({slices} slices, {metrics} metrics)")]
    RankingLengthMismatch { slices: usize, metrics: usize },

    #[error("time for `{0}` must be positive")]
    NonPositiveTime(NodeId),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no slices to optimize")]
    NoCandidates,

    #[error("threshold {0} must lie in (0, 1]")]
    ThresholdOutOfRange(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("edit leaves an invalid graph: {0}")]
    InvalidEdit(String),

    #[error("graph fails validation: {0}")]
    InvalidGraph(String),

    #[error("invalid slice: {0}")]
    InvalidSlice(String),
}
