//! Filtered directly-follows discovery with concurrency detection.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::eventlog::EventLog;
use crate::graph::{GraphError, NodeId, NodeKind, ProcessGraph};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DiscoveryError {
    #[error("parameter {name} = {value} outside [0, 1]")]
    Parameter { name: &'static str, value: f64 },
    #[error("cannot discover a model from an empty log")]
    EmptyLog,
    #[error("discovery failed: {0}")]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DfgNode {
    Start,
    Activity(String),
    End,
}

impl DfgNode {
    pub fn activity(label: &str) -> Self {
        DfgNode::Activity(label.to_string())
    }
}

pub type DfgEdge = (DfgNode, DfgNode);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dfg {
    pub activities: BTreeSet<String>,
    pub edges: BTreeMap<DfgEdge, u64>,
    /// Unordered pairs observed as `a, b, a` somewhere in the log.
    pub short_loops: BTreeSet<(String, String)>,
}

impl Dfg {
    pub fn freq(&self, a: &DfgNode, b: &DfgNode) -> u64 {
        self.edges.get(&(a.clone(), b.clone())).copied().unwrap_or(0)
    }

    fn nodes(&self) -> Vec<DfgNode> {
        let mut v = vec![DfgNode::Start];
        v.extend(self.activities.iter().map(|a| DfgNode::Activity(a.clone())));
        v.push(DfgNode::End);
        v
    }

    fn without_edges(&self, edges: BTreeMap<DfgEdge, u64>) -> Self {
        Self { activities: self.activities.clone(), edges, short_loops: self.short_loops.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryParams {
    pub eta: f64,
    pub epsilon: f64,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        Self { eta: 0.5, epsilon: 0.5 }
    }
}

impl DiscoveryParams {
    pub fn validate(&self) -> Result<(), DiscoveryError> {
        check_unit("eta", self.eta)?;
        check_unit("epsilon", self.epsilon)
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), DiscoveryError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DiscoveryError::Parameter { name, value })
    }
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub fn build_dfg(log: &EventLog) -> Dfg {
    let mut dfg = Dfg::default();
    for seq in log.sequences() {
        dfg.activities.extend(seq.iter().cloned());
        let mut nodes = vec![DfgNode::Start];
        nodes.extend(seq.iter().map(|a| DfgNode::activity(a)));
        nodes.push(DfgNode::End);
        for w in nodes.windows(2) {
            *dfg.edges.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
        }
        for w in seq.windows(3) {
            if w[0] == w[2] && w[0] != w[1] {
                dfg.short_loops.insert(ordered_pair(&w[0], &w[1]));
            }
        }
    }
    dfg
}

/// Pairs `{a, b}` whose two directly-follows edges are balanced within
/// `1 - eta`. Pairs seen as short loops are never concurrent.
pub fn detect_concurrency(dfg: &Dfg, eta: f64) -> Result<BTreeSet<(String, String)>, DiscoveryError> {
    check_unit("eta", eta)?;
    let mut pairs = BTreeSet::new();
    for ((a, b), &f1) in &dfg.edges {
        let (DfgNode::Activity(a), DfgNode::Activity(b)) = (a, b) else { continue };
        if a >= b {
            continue;
        }
        let f2 = dfg.freq(&DfgNode::activity(b), &DfgNode::activity(a));
        if f2 == 0 || dfg.short_loops.contains(&ordered_pair(a, b)) {
            continue;
        }
        let imbalance = f1.abs_diff(f2) as f64 / f1.max(f2) as f64;
        if imbalance <= 1.0 - eta {
            pairs.insert((a.clone(), b.clone()));
        }
    }
    Ok(pairs)
}

pub fn remove_concurrent_edges(dfg: &Dfg, concurrent: &BTreeSet<(String, String)>) -> Dfg {
    let edges = dfg
        .edges
        .iter()
        .filter(|((a, b), _)| match (a, b) {
            (DfgNode::Activity(a), DfgNode::Activity(b)) => !concurrent.contains(&ordered_pair(a, b)),
            _ => true,
        })
        .map(|(e, &f)| (e.clone(), f))
        .collect();
    dfg.without_edges(edges)
}

/// Keeps edges at or above the `epsilon` frequency percentile, restores each
/// activity's most frequent incoming and outgoing edge, then adds back the
/// heaviest input edges needed for every node to lie on a start-to-end path.
pub fn filter_dfg(dfg: &Dfg, epsilon: f64) -> Result<Dfg, DiscoveryError> {
    check_unit("epsilon", epsilon)?;
    if dfg.edges.is_empty() {
        return Ok(dfg.clone());
    }
    let mut freqs: Vec<u64> = dfg.edges.values().copied().collect();
    freqs.sort_unstable();
    let idx = ((epsilon * freqs.len() as f64).floor() as usize).min(freqs.len() - 1);
    let threshold = freqs[idx];
    let mut kept: BTreeMap<DfgEdge, u64> =
        dfg.edges.iter().filter(|(_, &f)| f >= threshold).map(|(e, &f)| (e.clone(), f)).collect();

    for a in &dfg.activities {
        let node = DfgNode::activity(a);
        for incoming in [true, false] {
            let best = dfg
                .edges
                .iter()
                .filter(|((s, t), _)| if incoming { *t == node } else { *s == node })
                .max_by(|x, y| x.1.cmp(y.1).then_with(|| y.0.cmp(x.0)));
            if let Some((e, &f)) = best {
                kept.insert(e.clone(), f);
            }
        }
    }
    repair_connectivity(dfg, &mut kept, true);
    repair_connectivity(dfg, &mut kept, false);
    Ok(dfg.without_edges(kept))
}

fn reach(edges: &BTreeMap<DfgEdge, u64>, from: &DfgNode, forward: bool) -> BTreeSet<DfgNode> {
    let mut seen = BTreeSet::from([from.clone()]);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(n) = queue.pop_front() {
        for (s, t) in edges.keys() {
            let (here, next) = if forward { (s, t) } else { (t, s) };
            if *here == n && seen.insert(next.clone()) {
                queue.push_back(next.clone());
            }
        }
    }
    seen
}

fn repair_connectivity(dfg: &Dfg, kept: &mut BTreeMap<DfgEdge, u64>, forward: bool) {
    let root = if forward { DfgNode::Start } else { DfgNode::End };
    let all = dfg.nodes();
    loop {
        let seen = reach(kept, &root, forward);
        if all.iter().all(|n| seen.contains(n)) {
            return;
        }
        let candidate = dfg
            .edges
            .iter()
            .filter(|((s, t), _)| {
                let (from, to) = if forward { (s, t) } else { (t, s) };
                seen.contains(from) && !seen.contains(to)
            })
            .max_by(|x, y| x.1.cmp(y.1).then_with(|| y.0.cmp(x.0)));
        match candidate {
            Some((e, &f)) => {
                kept.insert(e.clone(), f);
            }
            None => return,
        }
    }
}

/// Greedy maximal cliques in the given order.
fn cliques(items: &[DfgNode], concurrent: &BTreeSet<(String, String)>) -> Vec<Vec<DfgNode>> {
    let related = |a: &DfgNode, b: &DfgNode| match (a, b) {
        (DfgNode::Activity(a), DfgNode::Activity(b)) => concurrent.contains(&ordered_pair(a, b)),
        _ => false,
    };
    let mut assigned = vec![false; items.len()];
    let mut out = Vec::new();
    for i in 0..items.len() {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let mut clique = vec![items[i].clone()];
        for j in i + 1..items.len() {
            if !assigned[j] && clique.iter().all(|c| related(c, &items[j])) {
                assigned[j] = true;
                clique.push(items[j].clone());
            }
        }
        out.push(clique);
    }
    out
}

/// Builds the gateway structure for one side of a node. Returns the port each
/// neighbour attaches to.
fn ports(
    kinds: &mut Vec<NodeKind>,
    edges: &mut Vec<(NodeId, NodeId)>,
    owner: NodeId,
    neighbours: &[DfgNode],
    concurrent: &BTreeSet<(String, String)>,
    outgoing: bool,
) -> BTreeMap<DfgNode, NodeId> {
    let mut result = BTreeMap::new();
    let groups = cliques(neighbours, concurrent);
    let link = |kinds: &mut Vec<NodeKind>, edges: &mut Vec<(NodeId, NodeId)>, kind: NodeKind, to: NodeId| {
        kinds.push(kind);
        let id = kinds.len() - 1;
        edges.push(if outgoing { (to, id) } else { (id, to) });
        id
    };
    let (xor, and) = if outgoing {
        (NodeKind::XorSplit, NodeKind::AndSplit)
    } else {
        (NodeKind::XorJoin, NodeKind::AndJoin)
    };
    let hub = if groups.len() > 1 { link(kinds, edges, xor, owner) } else { owner };
    for group in groups {
        let port = if group.len() > 1 { link(kinds, edges, and.clone(), hub) } else { hub };
        for n in group {
            result.insert(n, port);
        }
    }
    result
}

pub fn construct_graph(
    dfg: &Dfg,
    concurrent: &BTreeSet<(String, String)>,
) -> Result<ProcessGraph, DiscoveryError> {
    let mut kinds = vec![NodeKind::Start];
    let mut ids: BTreeMap<DfgNode, NodeId> = BTreeMap::from([(DfgNode::Start, 0)]);
    for a in &dfg.activities {
        kinds.push(NodeKind::task(a));
        ids.insert(DfgNode::activity(a), kinds.len() - 1);
    }
    kinds.push(NodeKind::End);
    ids.insert(DfgNode::End, kinds.len() - 1);

    let mut succ: BTreeMap<DfgNode, Vec<DfgNode>> = BTreeMap::new();
    let mut pred: BTreeMap<DfgNode, Vec<DfgNode>> = BTreeMap::new();
    for (s, t) in dfg.edges.keys() {
        succ.entry(s.clone()).or_default().push(t.clone());
        pred.entry(t.clone()).or_default().push(s.clone());
    }

    let mut edges = Vec::new();
    let mut out_ports = BTreeMap::new();
    let mut in_ports = BTreeMap::new();
    for node in dfg.nodes() {
        let id = ids[&node];
        if let Some(s) = succ.get(&node) {
            out_ports.insert(node.clone(), ports(&mut kinds, &mut edges, id, s, concurrent, true));
        }
        if let Some(p) = pred.get(&node) {
            in_ports.insert(node.clone(), ports(&mut kinds, &mut edges, id, p, concurrent, false));
        }
    }
    for (s, t) in dfg.edges.keys() {
        edges.push((out_ports[s][t], in_ports[t][s]));
    }
    Ok(ProcessGraph::from_parts(kinds, edges)?)
}

/// Full discovery: concurrency detection, removal of concurrent edges,
/// frequency filtering and gateway construction.
pub fn discover(log: &EventLog, params: DiscoveryParams) -> Result<ProcessGraph, DiscoveryError> {
    params.validate()?;
    if log.is_empty() {
        return Err(DiscoveryError::EmptyLog);
    }
    let dfg = build_dfg(log);
    let concurrent = detect_concurrency(&dfg, params.eta)?;
    let reduced = remove_concurrent_edges(&dfg, &concurrent);
    let filtered = filter_dfg(&reduced, params.epsilon)?;
    construct_graph(&filtered, &concurrent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::tests::log_from_sequences;

    fn act(a: &str) -> DfgNode {
        DfgNode::activity(a)
    }

    #[test]
    fn dfg_counts() {
        let log = log_from_sequences(&[&["A", "B"], &["A", "B"]]);
        let dfg = build_dfg(&log);
        assert_eq!(dfg.freq(&act("A"), &act("B")), 2);
        assert_eq!(dfg.freq(&DfgNode::Start, &act("A")), 2);
        assert_eq!(dfg.freq(&act("B"), &DfgNode::End), 2);

        let dfg = build_dfg(&log_from_sequences(&[&["A", "B", "A"]]));
        assert_eq!(dfg.freq(&act("A"), &act("B")), 1);
        assert_eq!(dfg.freq(&act("B"), &act("A")), 1);
        assert!(dfg.short_loops.contains(&("A".into(), "B".into())));
    }

    fn dfg_with(freqs: &[(&str, &str, u64)]) -> Dfg {
        let mut dfg = Dfg::default();
        for &(a, b, f) in freqs {
            let node = |x: &str| match x {
                "start" => DfgNode::Start,
                "end" => DfgNode::End,
                _ => act(x),
            };
            for x in [a, b] {
                if x != "start" && x != "end" {
                    dfg.activities.insert(x.to_string());
                }
            }
            dfg.edges.insert((node(a), node(b)), f);
        }
        dfg
    }

    #[test]
    fn concurrency_formula() {
        let dfg = dfg_with(&[("A", "B", 10), ("B", "A", 10)]);
        assert_eq!(detect_concurrency(&dfg, 1.0).unwrap().len(), 1);
        assert_eq!(detect_concurrency(&dfg, 0.0).unwrap().len(), 1);
        let dfg = dfg_with(&[("A", "B", 10), ("B", "A", 1)]);
        assert!(detect_concurrency(&dfg, 0.9).unwrap().is_empty());
        assert_eq!(detect_concurrency(&dfg, 0.1).unwrap().len(), 1);
        let dfg = dfg_with(&[("A", "B", 10)]);
        assert!(detect_concurrency(&dfg, 0.0).unwrap().is_empty());
    }

    #[test]
    fn filter_extremes_and_quantile() {
        let dfg = dfg_with(&[
            ("start", "A", 4),
            ("A", "B", 3),
            ("A", "C", 1),
            ("B", "end", 3),
            ("C", "end", 2),
        ]);
        assert_eq!(filter_dfg(&dfg, 0.0).unwrap(), dfg);
        // freqs sorted {1,2,3,3,4}: index floor(0.5*5)=2 -> threshold 3
        let f = filter_dfg(&dfg, 0.5).unwrap();
        assert!(f.edges.contains_key(&(act("A"), act("B"))));
        // C's only in and out edges are re-added
        assert!(f.edges.contains_key(&(act("A"), act("C"))));
        assert!(f.edges.contains_key(&(act("C"), DfgNode::End)));

        let dfg = dfg_with(&[("start", "A", 5), ("A", "B", 5), ("B", "end", 5), ("A", "end", 1), ("start", "B", 1)]);
        let f = filter_dfg(&dfg, 1.0).unwrap();
        assert_eq!(f.edges.len(), 3);
    }

    #[test]
    fn linear_log_gives_no_gateways() {
        let log = log_from_sequences(&[&["A", "B", "C"]]);
        let g = discover(&log, DiscoveryParams { eta: 1.0, epsilon: 0.0 }).unwrap();
        assert_eq!(g.count_kind(NodeKind::is_gateway), 0);
        assert_eq!(g.nodes().len(), 5);
    }

    #[test]
    fn concurrent_successors_get_and_gateways() {
        let log = log_from_sequences(&[&["A", "B", "C", "D"], &["A", "C", "B", "D"]]);
        let g = discover(&log, DiscoveryParams { eta: 0.5, epsilon: 0.0 }).unwrap();
        assert_eq!(g.count_kind(|k| *k == NodeKind::AndSplit), 1);
        assert_eq!(g.count_kind(|k| *k == NodeKind::AndJoin), 1);
        assert_eq!(g.count_kind(|k| matches!(k, NodeKind::XorSplit | NodeKind::XorJoin)), 0);
    }

    #[test]
    fn exclusive_successors_get_xor_gateways() {
        let log = log_from_sequences(&[&["A", "B", "D"], &["A", "C", "D"]]);
        let g = discover(&log, DiscoveryParams { eta: 0.5, epsilon: 0.0 }).unwrap();
        assert_eq!(g.count_kind(|k| *k == NodeKind::XorSplit), 1);
        assert_eq!(g.count_kind(|k| *k == NodeKind::XorJoin), 1);
    }

    #[test]
    fn self_loop_becomes_xor_back_edge() {
        let log = log_from_sequences(&[&["A", "B", "B", "C"], &["A", "B", "C"]]);
        let g = discover(&log, DiscoveryParams { eta: 0.5, epsilon: 0.0 }).unwrap();
        let b = g.task_node("B").unwrap();
        let split = g.edge(g.outgoing(b)[0]).target;
        assert_eq!(g.node(split).kind, NodeKind::XorSplit);
        let join = g.edge(g.incoming(b)[0]).source;
        assert!(g.outgoing(split).iter().any(|&e| g.edge(e).target == join));
    }

    #[test]
    fn construction_is_deterministic() {
        let log = log_from_sequences(&[&["A", "B", "C", "D"], &["A", "C", "B", "D"], &["A", "E", "D"]]);
        let p = DiscoveryParams { eta: 0.3, epsilon: 0.2 };
        assert_eq!(discover(&log, p).unwrap(), discover(&log, p).unwrap());
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let log = log_from_sequences(&[&["A"]]);
        assert!(discover(&log, DiscoveryParams { eta: 1.5, epsilon: 0.0 }).is_err());
    }
}
