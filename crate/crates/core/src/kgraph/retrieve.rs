//! Subgraph retrieval: lexical seeding, breadth-first expansion with hop
//! decay, budgeted selection and provenance-annotated rendering.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use super::store::{GraphData, KgEdge, KgError, KgNode, NodeKind, Rel};

pub const HOP_DECAY: f64 = 0.5;
pub const DEFAULT_HOPS: usize = 2;
pub const DEFAULT_NODE_BUDGET: usize = 24;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "be", "by", "check", "do", "for", "how", "i", "in", "is", "it", "of", "on", "or",
    "should", "that", "the", "to", "what", "when", "with",
];

/// Lower-cased alphanumeric tokens of `text`, stopwords removed, deduplicated.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// Relevance of a node to a query before graph expansion, in `[0, 1]`.
pub trait Scorer {
    fn seed_score(&self, query: &str, node: &KgNode) -> f64;
}

/// Fraction of query tokens found in the node's label or body.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn seed_score(&self, query: &str, node: &KgNode) -> f64 {
        let q = tokens(query);
        if q.is_empty() {
            return 0.0;
        }
        let mut n = tokens(&node.label);
        n.extend(tokens(&node.body));
        q.intersection(&n).count() as f64 / q.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredNode {
    pub node: KgNode,
    pub score: f64,
    /// Hops from the nearest seed.
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subgraph {
    pub query: String,
    pub hop_radius: usize,
    /// Ordered by score descending, then id.
    pub nodes: Vec<ScoredNode>,
    pub edges: Vec<KgEdge>,
}

impl Subgraph {
    pub fn contains(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n.node.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Hop distance from `start` to every node within `k` hops, ignoring edge direction.
pub fn bfs_distances(g: &GraphData, start: &str, k: usize) -> BTreeMap<String, usize> {
    let adj = adjacency(g);
    bfs(&adj, start, k)
}

fn adjacency(g: &GraphData) -> HashMap<&str, Vec<&str>> {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in g.edges() {
        adj.entry(e.src.as_str()).or_default().push(e.dst.as_str());
        adj.entry(e.dst.as_str()).or_default().push(e.src.as_str());
    }
    adj
}

fn bfs(adj: &HashMap<&str, Vec<&str>>, start: &str, k: usize) -> BTreeMap<String, usize> {
    let mut dist = BTreeMap::new();
    dist.insert(start.to_string(), 0);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((n, d)) = queue.pop_front() {
        if d == k {
            continue;
        }
        for &m in adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            if !dist.contains_key(m) {
                dist.insert(m.to_string(), d + 1);
                queue.push_back((m, d + 1));
            }
        }
    }
    dist
}

pub fn retrieve_subgraph(g: &GraphData, query: &str, k_hops: usize, node_budget: usize) -> Subgraph {
    retrieve_with(g, query, k_hops, node_budget, &LexicalScorer)
}

pub fn retrieve_with(g: &GraphData, query: &str, k_hops: usize, node_budget: usize, scorer: &dyn Scorer) -> Subgraph {
    let adj = adjacency(g);
    let mut best: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for n in g.nodes() {
        let s = scorer.seed_score(query, n).clamp(0.0, 1.0);
        if s <= 0.0 {
            continue;
        }
        for (id, d) in bfs(&adj, &n.id, k_hops) {
            let score = s * HOP_DECAY.powi(d as i32);
            let e = best.entry(id).or_insert((0.0, d));
            if score > e.0 {
                e.0 = score;
            }
            e.1 = e.1.min(d);
        }
    }
    let mut ranked: Vec<(String, f64, usize)> = best.into_iter().map(|(id, (s, d))| (id, s, d)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(node_budget);
    let chosen: BTreeSet<&str> = ranked.iter().map(|r| r.0.as_str()).collect();
    let edges =
        g.edges().filter(|e| chosen.contains(e.src.as_str()) && chosen.contains(e.dst.as_str())).cloned().collect();
    let nodes = ranked
        .iter()
        .map(|(id, score, distance)| ScoredNode {
            node: g.node(id).expect("retrieved ids exist").clone(),
            score: *score,
            distance: *distance,
        })
        .collect();
    Subgraph { query: query.to_string(), hop_radius: k_hops, nodes, edges }
}

const KIND_ORDER: [NodeKind; 7] = [
    NodeKind::Rule,
    NodeKind::Signal,
    NodeKind::Property,
    NodeKind::Requirement,
    NodeKind::DesignModule,
    NodeKind::Proof,
    NodeKind::Counterexample,
];

fn one_line(s: &str) -> String {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}

/// Grounded context: rules, then signals, then properties, then the rest.
/// Each line cites exactly one node.
pub fn answer_context(sub: &Subgraph) -> String {
    let mut out = String::new();
    for kind in KIND_ORDER {
        for n in sub.nodes.iter().filter(|n| n.node.kind == kind) {
            let label = one_line(&n.node.label);
            let body = one_line(&n.node.body);
            let kind = format!("{:?}", n.node.kind).to_ascii_lowercase();
            if body.is_empty() {
                out.push_str(&format!("{kind} {label} [node:{}]\n", n.node.id));
            } else {
                out.push_str(&format!("{kind} {label}: {body} [node:{}]\n", n.node.id));
            }
        }
    }
    out
}

/// Traceability of one requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainReport {
    pub requirement: String,
    /// Each chain is `[requirement, property, proof or counterexample]`.
    pub chains: Vec<Vec<String>>,
}

impl ChainReport {
    pub fn uncovered(&self) -> bool {
        self.chains.is_empty()
    }
}

/// Requirement -> implementing property -> proof or counterexample paths.
pub fn trace_chain(g: &GraphData, requirement_id: &str) -> Result<ChainReport, KgError> {
    match g.node(requirement_id) {
        Some(n) if n.kind == NodeKind::Requirement => {}
        _ => return Err(KgError::UnknownNode(requirement_id.to_string())),
    }
    let mut chains = Vec::new();
    for imp in g.outgoing(requirement_id).filter(|e| e.rel == Rel::Implements) {
        for ev in g.outgoing(&imp.dst).filter(|e| matches!(e.rel, Rel::ProvenBy | Rel::ViolatedBy)) {
            chains.push(vec![requirement_id.to_string(), imp.dst.clone(), ev.dst.clone()]);
        }
    }
    Ok(ChainReport { requirement: requirement_id.to_string(), chains })
}

/// Requirements with no Requirement -> Property -> evidence chain.
pub fn uncovered_requirements(g: &GraphData) -> Vec<String> {
    g.nodes()
        .filter(|n| n.kind == NodeKind::Requirement)
        .filter(|n| trace_chain(g, &n.id).map(|r| r.uncovered()).unwrap_or(true))
        .map(|n| n.id.clone())
        .collect()
}
