//! Crate-wide error type.
//!
//! Every fallible operation distinguishes *structural* errors (bad input:
//! disconnected graph, empty set, id out of range) from *argument* errors
//! (caller asked for something the math does not define, e.g. projecting
//! onto an empty subspace or nesting checks on non-nested pairs).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected: no path between vertices {u} and {v}")]
    Disconnected { u: usize, v: usize },

    #[error("vertex id {id} out of range for graph with {n} vertices")]
    VertexOutOfRange { id: usize, n: usize },

    #[error("graph has {n} vertices; this build caps graphs at {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("invalid edge ({u}, {v}): {reason}")]
    InvalidEdge { u: usize, v: usize, reason: &'static str },

    #[error("empty vertex set given for {what}")]
    EmptySet { what: &'static str },

    #[error("subspace '{name}' is not connected in the host graph")]
    SubspaceDisconnected { name: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rewriting system is not confluent at ball scale: word '{word}' has two normal forms '{nf1}' and '{nf2}'")]
    NotConfluent { word: String, nf1: String, nf2: String },

    #[error("rewriting rule '{lhs}' -> '{rhs}' is not shortlex-reducing")]
    NotReducing { lhs: String, rhs: String },

    #[error("presentation is missing free-reduction rules for generator '{gen}'")]
    MissingFreeReduction { gen: String },

    #[error("subgroup {index} is trivial inside the ball")]
    TrivialSubgroup { index: usize },

    #[error("cosets {i} and {j} are not a proximal pair (projection diameter {diam} < {threshold})")]
    NotProximal { i: usize, j: usize, diam: u32, threshold: u32 },

    #[error("bound violated in {check}: measured {measured} > allowed {bound}")]
    BoundViolated { check: &'static str, measured: f64, bound: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
