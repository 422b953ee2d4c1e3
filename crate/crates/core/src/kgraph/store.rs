//! In-memory property graph with typed nodes and relation-kind checks.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Requirement,
    Signal,
    Property,
    Proof,
    Counterexample,
    DesignModule,
    Rule,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rel {
    Implements,
    Constrains,
    ProvenBy,
    ViolatedBy,
    BoundTo,
    DerivedFrom,
}

impl Rel {
    pub fn as_str(self) -> &'static str {
        match self {
            Rel::Implements => "implements",
            Rel::Constrains => "constrains",
            Rel::ProvenBy => "proven_by",
            Rel::ViolatedBy => "violated_by",
            Rel::BoundTo => "bound_to",
            Rel::DerivedFrom => "derived_from",
        }
    }

    /// Whether an edge of this relation may run from `src` to `dst`.
    pub fn allows(self, src: NodeKind, dst: NodeKind) -> bool {
        use NodeKind::*;
        match self {
            Rel::Implements => src == Requirement && dst == Property,
            Rel::Constrains => {
                matches!(src, Rule | Requirement) && matches!(dst, Signal | Property | DesignModule | Rule)
            }
            Rel::ProvenBy => src == Property && dst == Proof,
            Rel::ViolatedBy => src == Property && dst == Counterexample,
            Rel::BoundTo => {
                matches!((src, dst), (Property, Signal) | (Signal, DesignModule) | (Property, DesignModule))
            }
            // lineage may connect any two artifacts
            Rel::DerivedFrom => true,
        }
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgNode {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

impl KgNode {
    pub fn new(id: impl Into<String>, kind: NodeKind, label: impl Into<String>) -> Self {
        KgNode { id: id.into(), kind, label: label.into(), body: String::new(), attrs: BTreeMap::new() }
    }

    pub fn with_body(mut self, body: impl Into<String>) -> Self {
        self.body = body.into();
        self
    }

    pub fn with_attr(mut self, k: impl Into<String>, v: impl Into<String>) -> Self {
        self.attrs.insert(k.into(), v.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgEdge {
    pub src: String,
    pub dst: String,
    pub rel: Rel,
    #[serde(default)]
    pub provenance: String,
}

impl KgEdge {
    pub fn new(src: impl Into<String>, rel: Rel, dst: impl Into<String>, provenance: impl Into<String>) -> Self {
        KgEdge { src: src.into(), dst: dst.into(), rel, provenance: provenance.into() }
    }
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{rel} cannot connect {src} to {dst}")]
    RelKindMismatch { rel: Rel, src: NodeKind, dst: NodeKind },
    #[error("edge endpoint `{0}` does not exist")]
    DanglingEndpoint(String),
    #[error("node `{0}` does not exist")]
    UnknownNode(String),
    #[error("node `{id}` is a {existing}, cannot become a {requested}")]
    KindChanged { id: String, existing: NodeKind, requested: NodeKind },
    #[error("snapshot line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable graph contents. Retrieval runs on one of these.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphData {
    nodes: BTreeMap<String, KgNode>,
    /// Keyed by (src, rel, dst); re-upserting an edge replaces its provenance.
    edges: BTreeMap<(String, Rel, String), KgEdge>,
}

impl GraphData {
    pub fn node(&self, id: &str) -> Option<&KgNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &KgNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &KgEdge> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Outgoing edges of `id`, ordered by relation then destination.
    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a KgEdge> + 'a {
        self.edges.values().filter(move |e| e.src == id)
    }

    /// Neighbours ignoring edge direction, sorted and deduplicated.
    pub fn neighbours(&self, id: &str) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .edges
            .values()
            .filter_map(|e| {
                if e.src == id {
                    Some(e.dst.as_str())
                } else if e.dst == id {
                    Some(e.src.as_str())
                } else {
                    None
                }
            })
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn upsert_node(&mut self, node: KgNode) -> Result<String, KgError> {
        if let Some(old) = self.nodes.get(&node.id) {
            if old.kind != node.kind {
                return Err(KgError::KindChanged { id: node.id, existing: old.kind, requested: node.kind });
            }
        }
        let id = node.id.clone();
        self.nodes.insert(id.clone(), node);
        Ok(id)
    }

    fn upsert_edge(&mut self, edge: KgEdge) -> Result<(), KgError> {
        let src = self.nodes.get(&edge.src).ok_or_else(|| KgError::DanglingEndpoint(edge.src.clone()))?;
        let dst = self.nodes.get(&edge.dst).ok_or_else(|| KgError::DanglingEndpoint(edge.dst.clone()))?;
        if !edge.rel.allows(src.kind, dst.kind) {
            return Err(KgError::RelKindMismatch { rel: edge.rel, src: src.kind, dst: dst.kind });
        }
        self.edges.insert((edge.src.clone(), edge.rel, edge.dst.clone()), edge);
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum SnapshotLine {
    Node(KgNode),
    Edge(KgEdge),
}

/// Shared graph store: many readers, serialized writers. Readers take a
/// snapshot that later writes do not affect.
#[derive(Debug, Default)]
pub struct KnowledgeGraph {
    data: RwLock<Arc<GraphData>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Arc<GraphData> {
        self.data.read().expect("graph lock poisoned").clone()
    }

    fn write<T>(&self, f: impl FnOnce(&mut GraphData) -> Result<T, KgError>) -> Result<T, KgError> {
        let mut guard = self.data.write().expect("graph lock poisoned");
        f(Arc::make_mut(&mut guard))
    }

    /// Insert or replace a node. Its edges are kept; its kind may not change.
    pub fn upsert_node(&self, node: KgNode) -> Result<String, KgError> {
        self.write(|g| g.upsert_node(node))
    }

    pub fn upsert_edge(&self, edge: KgEdge) -> Result<(), KgError> {
        self.write(|g| g.upsert_edge(edge))
    }

    /// JSONL snapshot: node lines, then edge lines.
    pub fn to_jsonl(&self) -> String {
        let g = self.snapshot();
        let mut out = String::new();
        for n in g.nodes() {
            out.push_str(&serde_json::to_string(&SnapshotLine::Node(n.clone())).expect("node serializes"));
            out.push('\n');
        }
        for e in g.edges() {
            out.push_str(&serde_json::to_string(&SnapshotLine::Edge(e.clone())).expect("edge serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, KgError> {
        let mut g = GraphData::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SnapshotLine =
                serde_json::from_str(line).map_err(|e| KgError::Malformed { line: i + 1, msg: e.to_string() })?;
            match parsed {
                SnapshotLine::Node(n) => g.upsert_node(n)?,
                SnapshotLine::Edge(e) => {
                    g.upsert_edge(e)?;
                    String::new()
                }
            };
        }
        Ok(KnowledgeGraph { data: RwLock::new(Arc::new(g)) })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), KgError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, KgError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> KnowledgeGraph {
        let g = KnowledgeGraph::new();
        g.upsert_node(KgNode::new("p", NodeKind::Property, "req_ack")).unwrap();
        g.upsert_node(KgNode::new("pf", NodeKind::Proof, "proof of req_ack")).unwrap();
        g.upsert_node(KgNode::new("s", NodeKind::Signal, "req")).unwrap();
        g
    }

    #[test]
    fn rel_kinds_are_checked() {
        let g = graph();
        g.upsert_edge(KgEdge::new("p", Rel::ProvenBy, "pf", "engine")).unwrap();
        assert!(matches!(
            g.upsert_edge(KgEdge::new("s", Rel::ProvenBy, "pf", "engine")),
            Err(KgError::RelKindMismatch { src: NodeKind::Signal, .. })
        ));
        assert!(matches!(
            g.upsert_edge(KgEdge::new("p", Rel::BoundTo, "nope", "")),
            Err(KgError::DanglingEndpoint(id)) if id == "nope"
        ));
    }

    #[test]
    fn reupsert_replaces_body_and_keeps_edges() {
        let g = graph();
        g.upsert_edge(KgEdge::new("p", Rel::BoundTo, "s", "binding")).unwrap();
        g.upsert_node(KgNode::new("p", NodeKind::Property, "req_ack").with_body("new body")).unwrap();
        let snap = g.snapshot();
        assert_eq!(snap.node("p").unwrap().body, "new body");
        assert_eq!(snap.edge_count(), 1);
        assert!(g.upsert_node(KgNode::new("p", NodeKind::Signal, "x")).is_err());
    }

    #[test]
    fn snapshots_are_isolated_from_later_writes() {
        let g = graph();
        let before = g.snapshot();
        g.upsert_node(KgNode::new("r", NodeKind::Rule, "r")).unwrap();
        assert_eq!(before.node_count(), 3);
        assert_eq!(g.snapshot().node_count(), 4);
    }

    #[test]
    fn jsonl_round_trip() {
        let g = graph();
        g.upsert_edge(KgEdge::new("p", Rel::ProvenBy, "pf", "engine depth 8")).unwrap();
        let text = g.to_jsonl();
        assert!(text.lines().next().unwrap().starts_with("{\"type\":\"node\""));
        assert!(text.lines().last().unwrap().starts_with("{\"type\":\"edge\""));
        let back = KnowledgeGraph::from_jsonl(&text).unwrap();
        assert_eq!(*back.snapshot(), *g.snapshot());
        assert!(matches!(KnowledgeGraph::from_jsonl("{\"type\":\"x\"}"), Err(KgError::Malformed { line: 1, .. })));
    }
}
