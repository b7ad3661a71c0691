//! Gateway-structured process graphs and their stochastic annotation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("invalid branching probabilities: {0}")]
    Probabilities(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Start,
    End,
    Task { label: String },
    XorSplit,
    XorJoin,
    AndSplit,
    AndJoin,
}

impl NodeKind {
    pub fn task(label: impl Into<String>) -> Self {
        NodeKind::Task { label: label.into() }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            NodeKind::Task { label } => Some(label),
            _ => None,
        }
    }

    pub fn is_gateway(&self) -> bool {
        matches!(self, NodeKind::XorSplit | NodeKind::XorJoin | NodeKind::AndSplit | NodeKind::AndJoin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(flatten)]
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub source: NodeId,
    pub target: NodeId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphDocument {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// Directed graph of tasks and gateways. Node and edge ids are their
/// positions in the respective lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct ProcessGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<EdgeId>>,
    incoming: Vec<Vec<EdgeId>>,
}

impl From<ProcessGraph> for GraphDocument {
    fn from(g: ProcessGraph) -> Self {
        GraphDocument { nodes: g.nodes, edges: g.edges }
    }
}

impl TryFrom<GraphDocument> for ProcessGraph {
    type Error = GraphError;

    fn try_from(doc: GraphDocument) -> Result<Self, GraphError> {
        for (i, n) in doc.nodes.iter().enumerate() {
            if n.id != i {
                return Err(GraphError::Invalid(format!("node at position {i} has id {}", n.id)));
            }
        }
        for (i, e) in doc.edges.iter().enumerate() {
            if e.id != i {
                return Err(GraphError::Invalid(format!("edge at position {i} has id {}", e.id)));
            }
        }
        let g = ProcessGraph::from_parts(doc.nodes.into_iter().map(|n| n.kind).collect(), doc.edges.iter().map(|e| (e.source, e.target)).collect())?;
        Ok(g)
    }
}

#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    kinds: Vec<NodeKind>,
    edges: Vec<(NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn node(&mut self, kind: NodeKind) -> NodeId {
        self.kinds.push(kind);
        self.kinds.len() - 1
    }

    pub fn task(&mut self, label: &str) -> NodeId {
        self.node(NodeKind::task(label))
    }

    pub fn edge(&mut self, source: NodeId, target: NodeId) -> EdgeId {
        self.edges.push((source, target));
        self.edges.len() - 1
    }

    /// Adds edges along a chain of nodes.
    pub fn chain(&mut self, nodes: &[NodeId]) {
        for w in nodes.windows(2) {
            self.edge(w[0], w[1]);
        }
    }

    pub fn build(self) -> Result<ProcessGraph, GraphError> {
        ProcessGraph::from_parts(self.kinds, self.edges)
    }
}

impl ProcessGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    /// Builds and validates a graph from node kinds and (source, target) pairs.
    pub fn from_parts(kinds: Vec<NodeKind>, edge_list: Vec<(NodeId, NodeId)>) -> Result<Self, GraphError> {
        let n = kinds.len();
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut seen = BTreeSet::new();
        for (id, (s, t)) in edge_list.into_iter().enumerate() {
            if s >= n || t >= n {
                return Err(GraphError::Invalid(format!("edge {id} references a missing node")));
            }
            if !seen.insert((s, t)) {
                return Err(GraphError::Invalid(format!("duplicate edge {s} -> {t}")));
            }
            outgoing[s].push(id);
            incoming[t].push(id);
            edges.push(Edge { id, source: s, target: t });
        }
        let nodes = kinds.into_iter().enumerate().map(|(id, kind)| Node { id, kind }).collect();
        let g = Self { nodes, edges, outgoing, incoming };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let starts: Vec<NodeId> = self.nodes.iter().filter(|n| n.kind == NodeKind::Start).map(|n| n.id).collect();
        let ends: Vec<NodeId> = self.nodes.iter().filter(|n| n.kind == NodeKind::End).map(|n| n.id).collect();
        if starts.len() != 1 || ends.len() != 1 {
            return Err(GraphError::Invalid(format!(
                "expected one start and one end node, found {} and {}",
                starts.len(),
                ends.len()
            )));
        }
        let mut labels = BTreeSet::new();
        for node in &self.nodes {
            let (ins, outs) = (self.incoming[node.id].len(), self.outgoing[node.id].len());
            let describe = || self.describe(node.id);
            let ok = match &node.kind {
                NodeKind::Start => ins == 0 && outs == 1,
                NodeKind::End => ins == 1 && outs == 0,
                NodeKind::Task { label } => {
                    if label.is_empty() {
                        return Err(GraphError::Invalid(format!("node {} has an empty label", node.id)));
                    }
                    if !labels.insert(label.as_str()) {
                        return Err(GraphError::Invalid(format!("task label {label:?} appears twice")));
                    }
                    ins == 1 && outs == 1
                }
                NodeKind::XorSplit | NodeKind::AndSplit => ins == 1 && outs >= 2,
                NodeKind::XorJoin | NodeKind::AndJoin => ins >= 2 && outs == 1,
            };
            if !ok {
                return Err(GraphError::Invalid(format!(
                    "{} has {ins} incoming and {outs} outgoing edges",
                    describe()
                )));
            }
        }
        let forward = self.reachable(starts[0], true);
        let backward = self.reachable(ends[0], false);
        for node in &self.nodes {
            if !forward[node.id] {
                return Err(GraphError::Invalid(format!("{} is unreachable from start", self.describe(node.id))));
            }
            if !backward[node.id] {
                return Err(GraphError::Invalid(format!("{} cannot reach end", self.describe(node.id))));
            }
        }
        Ok(())
    }

    fn reachable(&self, from: NodeId, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(n) = queue.pop_front() {
            let edges = if forward { &self.outgoing[n] } else { &self.incoming[n] };
            for &e in edges {
                let next = if forward { self.edges[e].target } else { self.edges[e].source };
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    pub fn describe(&self, id: NodeId) -> String {
        match &self.nodes[id].kind {
            NodeKind::Task { label } => format!("task {label:?} (node {id})"),
            other => format!("{other:?} node {id}"),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn outgoing(&self, id: NodeId) -> &[EdgeId] {
        &self.outgoing[id]
    }

    pub fn incoming(&self, id: NodeId) -> &[EdgeId] {
        &self.incoming[id]
    }

    pub fn start(&self) -> NodeId {
        self.nodes.iter().position(|n| n.kind == NodeKind::Start).expect("validated")
    }

    pub fn end(&self) -> NodeId {
        self.nodes.iter().position(|n| n.kind == NodeKind::End).expect("validated")
    }

    pub fn task_labels(&self) -> BTreeSet<String> {
        self.nodes.iter().filter_map(|n| n.kind.label().map(str::to_string)).collect()
    }

    pub fn task_node(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.kind.label() == Some(label))
    }

    pub fn xor_splits(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::XorSplit).map(|n| n.id).collect()
    }

    pub fn count_kind(&self, pred: impl Fn(&NodeKind) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.kind)).count()
    }

    /// Returns a copy with a new task placed on `edge`.
    pub fn splice_task(&self, edge: EdgeId, label: &str) -> Result<ProcessGraph, GraphError> {
        if edge >= self.edges.len() {
            return Err(GraphError::Invalid(format!("no edge {edge}")));
        }
        let mut kinds: Vec<NodeKind> = self.nodes.iter().map(|n| n.kind.clone()).collect();
        kinds.push(NodeKind::task(label));
        let new_node = kinds.len() - 1;
        let mut list: Vec<(NodeId, NodeId)> = self.edges.iter().map(|e| (e.source, e.target)).collect();
        let (s, t) = list[edge];
        list[edge] = (s, new_node);
        list.push((new_node, t));
        ProcessGraph::from_parts(kinds, list)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialises")
    }
}

/// A process graph whose XOR-split out-edges carry traversal probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub struct StochasticProcessModel {
    graph: ProcessGraph,
    probabilities: BTreeMap<EdgeId, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchProbability {
    pub split: NodeId,
    pub edge: EdgeId,
    pub target: NodeId,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    graph: ProcessGraph,
    branches: Vec<BranchProbability>,
}

impl From<StochasticProcessModel> for ModelDocument {
    fn from(m: StochasticProcessModel) -> Self {
        let branches = m.branches();
        ModelDocument { graph: m.graph, branches }
    }
}

impl TryFrom<ModelDocument> for StochasticProcessModel {
    type Error = GraphError;

    fn try_from(doc: ModelDocument) -> Result<Self, GraphError> {
        let mut probabilities = BTreeMap::new();
        for b in &doc.branches {
            if b.edge >= doc.graph.edges().len() || doc.graph.edge(b.edge).source != b.split {
                return Err(GraphError::Probabilities(format!(
                    "edge {} is not an outgoing edge of node {}",
                    b.edge, b.split
                )));
            }
            if probabilities.insert(b.edge, b.probability).is_some() {
                return Err(GraphError::Probabilities(format!("edge {} listed twice", b.edge)));
            }
        }
        StochasticProcessModel::new(doc.graph, probabilities)
    }
}

const PROBABILITY_TOLERANCE: f64 = 1e-9;

impl StochasticProcessModel {
    pub fn new(graph: ProcessGraph, probabilities: BTreeMap<EdgeId, f64>) -> Result<Self, GraphError> {
        let m = Self { graph, probabilities };
        m.validate()?;
        Ok(m)
    }

    /// Every XOR-split out-edge gets `1/k`.
    pub fn equiprobable(graph: ProcessGraph) -> Self {
        let mut probabilities = BTreeMap::new();
        for split in graph.xor_splits() {
            let outs = graph.outgoing(split);
            for &e in outs {
                probabilities.insert(e, 1.0 / outs.len() as f64);
            }
        }
        Self { graph, probabilities }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        self.graph.validate()?;
        let splits = self.graph.xor_splits();
        let expected: BTreeSet<EdgeId> =
            splits.iter().flat_map(|&s| self.graph.outgoing(s).iter().copied()).collect();
        for e in self.probabilities.keys() {
            if !expected.contains(e) {
                return Err(GraphError::Probabilities(format!(
                    "edge {e} does not leave an exclusive split"
                )));
            }
        }
        for s in splits {
            let mut sum = 0.0;
            for &e in self.graph.outgoing(s) {
                let p = *self.probabilities.get(&e).ok_or_else(|| {
                    GraphError::Probabilities(format!("split node {s}: edge {e} has no probability"))
                })?;
                if !(p.is_finite() && p >= 0.0) {
                    return Err(GraphError::Probabilities(format!(
                        "split node {s}: edge {e} has probability {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(GraphError::Probabilities(format!(
                    "split node {s}: probabilities sum to {sum}"
                )));
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> &ProcessGraph {
        &self.graph
    }

    pub fn probability(&self, edge: EdgeId) -> Option<f64> {
        self.probabilities.get(&edge).copied()
    }

    pub fn probabilities(&self) -> &BTreeMap<EdgeId, f64> {
        &self.probabilities
    }

    pub fn split_probabilities(&self, split: NodeId) -> Vec<(EdgeId, f64)> {
        self.graph.outgoing(split).iter().map(|&e| (e, self.probabilities[&e])).collect()
    }

    pub fn branches(&self) -> Vec<BranchProbability> {
        self.probabilities
            .iter()
            .map(|(&edge, &probability)| {
                let e = self.graph.edge(edge);
                BranchProbability { split: e.source, edge, target: e.target, probability }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// start -> A -> xor(X | Y) -> join -> D -> end
    pub(crate) fn xor_graph() -> ProcessGraph {
        let mut b = ProcessGraph::builder();
        let s = b.node(NodeKind::Start);
        let a = b.task("A");
        let split = b.node(NodeKind::XorSplit);
        let x = b.task("X");
        let y = b.task("Y");
        let join = b.node(NodeKind::XorJoin);
        let d = b.task("D");
        let e = b.node(NodeKind::End);
        b.chain(&[s, a, split, x, join, d, e]);
        b.chain(&[split, y, join]);
        b.build().unwrap()
    }

    #[test]
    fn json_round_trip() {
        let g = xor_graph();
        let back: ProcessGraph = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(g, back);
        let m = StochasticProcessModel::equiprobable(g);
        let back = StochasticProcessModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_structural_violations() {
        let mut b = ProcessGraph::builder();
        let s = b.node(NodeKind::Start);
        let a = b.task("A");
        let split = b.node(NodeKind::XorSplit);
        let e = b.node(NodeKind::End);
        b.chain(&[s, a, split, e]);
        let err = b.build().unwrap_err();
        assert!(err.to_string().contains("XorSplit node 2"), "{err}");

        let mut b = ProcessGraph::builder();
        let s = b.node(NodeKind::Start);
        let a = b.task("A");
        let orphan = b.task("Z");
        let e = b.node(NodeKind::End);
        let z2 = b.task("Z2");
        b.chain(&[s, a, e]);
        b.chain(&[orphan, z2]);
        assert!(b.build().is_err());
    }

    #[test]
    fn probability_sum_is_checked_and_names_the_split() {
        let g = xor_graph();
        let outs = g.outgoing(2).to_vec();
        let probs = BTreeMap::from([(outs[0], 0.6), (outs[1], 0.5)]);
        let err = StochasticProcessModel::new(g.clone(), probs).unwrap_err();
        assert!(err.to_string().contains("split node 2"), "{err}");
        let probs = BTreeMap::from([(outs[0], 0.7), (outs[1], 0.3)]);
        assert!(StochasticProcessModel::new(g, probs).is_ok());
    }

    #[test]
    fn splice_inserts_a_task_on_an_edge() {
        let g = xor_graph();
        let d = g.task_node("D").unwrap();
        let edge = g.outgoing(d)[0];
        let g2 = g.splice_task(edge, "N").unwrap();
        let n = g2.task_node("N").unwrap();
        assert_eq!(g2.edge(g2.outgoing(d)[0]).target, n);
        assert_eq!(g2.edge(g2.outgoing(n)[0]).target, g2.end());
    }

    #[test]
    fn mismatched_ids_are_rejected_on_load() {
        let text = r#"{"nodes":[{"id":1,"kind":"start"}],"edges":[]}"#;
        assert!(serde_json::from_str::<ProcessGraph>(text).is_err());
    }
}
