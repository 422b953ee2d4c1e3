//! Typed knowledge graph over verification artifacts with subgraph retrieval.

mod retrieve;
mod seed;
mod store;

pub use retrieve::{
    answer_context, bfs_distances, retrieve_subgraph, retrieve_with, tokens, trace_chain, uncovered_requirements,
    ChainReport, LexicalScorer, ScoredNode, Scorer, Subgraph, DEFAULT_HOPS, DEFAULT_NODE_BUDGET, HOP_DECAY,
};
pub use seed::axi_seed;
pub use store::{GraphData, KgEdge, KgError, KgNode, KnowledgeGraph, NodeKind, Rel};
