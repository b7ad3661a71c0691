//! Token-game execution of a process graph.
//!
//! A marking holds a FIFO of tokens per edge. Every edge has exactly one
//! target, so firing a node never steals tokens from another node; AND
//! gateways and XOR-joins therefore fire eagerly during [`settle`] without
//! losing behaviour, and the only choices left are XOR-split branches and
//! which enabled task runs next. Tokens carry a value that AND-joins merge;
//! untimed execution uses `()` and timed replay uses epoch seconds.

use std::hash::Hash;

use crate::graph::{EdgeId, NodeId, NodeKind, ProcessGraph};

pub trait TokenValue: Copy + Eq + Hash + std::fmt::Debug {
    fn merge(self, other: Self) -> Self;
}

impl TokenValue for () {
    fn merge(self, _: Self) -> Self {}
}

impl TokenValue for i64 {
    fn merge(self, other: Self) -> Self {
        self.max(other)
    }
}

/// Upper bound on tokens in one marking; beyond it the graph is treated as
/// unbounded and the state is abandoned.
const MAX_TOKENS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Marking<T> {
    tokens: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unbounded;

impl<T: TokenValue> Marking<T> {
    pub fn initial(graph: &ProcessGraph, value: T) -> Self {
        let mut tokens = vec![Vec::new(); graph.edges().len()];
        tokens[graph.outgoing(graph.start())[0]].push(value);
        Self { tokens }
    }

    pub fn has(&self, edge: EdgeId) -> bool {
        !self.tokens[edge].is_empty()
    }

    fn take(&mut self, edge: EdgeId) -> T {
        self.tokens[edge].remove(0)
    }

    fn put(&mut self, edge: EdgeId, value: T) {
        self.tokens[edge].push(value);
    }

    pub fn total(&self) -> usize {
        self.tokens.iter().map(Vec::len).sum()
    }

    /// A token waits in front of the end node.
    pub fn completed(&self, graph: &ProcessGraph) -> bool {
        self.has(graph.incoming(graph.end())[0])
    }

    /// Fires AND gateways and XOR-joins until none is enabled. Returns the
    /// lowest-id enabled XOR-split, whose branch must be chosen next.
    pub fn settle(&mut self, graph: &ProcessGraph) -> Result<Option<NodeId>, Unbounded> {
        loop {
            let mut fired = false;
            for node in graph.nodes() {
                let ins = graph.incoming(node.id);
                let outs = graph.outgoing(node.id);
                match node.kind {
                    NodeKind::AndSplit if self.has(ins[0]) => {
                        let v = self.take(ins[0]);
                        for &e in outs {
                            self.put(e, v);
                        }
                        fired = true;
                    }
                    NodeKind::AndJoin if ins.iter().all(|&e| self.has(e)) => {
                        let mut v = self.take(ins[0]);
                        for &e in &ins[1..] {
                            v = v.merge(self.take(e));
                        }
                        self.put(outs[0], v);
                        fired = true;
                    }
                    NodeKind::XorJoin => {
                        if let Some(&e) = ins.iter().find(|&&e| self.has(e)) {
                            let v = self.take(e);
                            self.put(outs[0], v);
                            fired = true;
                        }
                    }
                    _ => {}
                }
            }
            if self.total() > MAX_TOKENS {
                return Err(Unbounded);
            }
            if !fired {
                break;
            }
        }
        Ok(graph
            .nodes()
            .iter()
            .find(|n| n.kind == NodeKind::XorSplit && self.has(graph.incoming(n.id)[0]))
            .map(|n| n.id))
    }

    /// Moves the split's input token onto the chosen out-edge.
    pub fn choose(&mut self, graph: &ProcessGraph, split: NodeId, edge: EdgeId) {
        debug_assert_eq!(graph.edge(edge).source, split);
        let v = self.take(graph.incoming(split)[0]);
        self.put(edge, v);
    }

    pub fn enabled_tasks(&self, graph: &ProcessGraph) -> Vec<NodeId> {
        graph
            .nodes()
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Task { .. }) && self.has(graph.incoming(n.id)[0]))
            .map(|n| n.id)
            .collect()
    }

    /// Fires a task, returning the value of the token that enabled it.
    pub fn fire_task(&mut self, graph: &ProcessGraph, task: NodeId, output: T) -> T {
        let v = self.take(graph.incoming(task)[0]);
        self.put(graph.outgoing(task)[0], output);
        v
    }
}
