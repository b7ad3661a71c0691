//! Trace alignment, repair and replacement of non-conformant traces, timed
//! replay and branching probabilities.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::assignment::levenshtein;
use crate::eventlog::{Event, EventLog, Timestamp, Trace};
use crate::graph::{EdgeId, NodeId, ProcessGraph, StochasticProcessModel};
use crate::semantics::Marking;

pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConformanceError {
    #[error("alignment explored more than {limit} states")]
    AlignmentTimeout { limit: usize },
    #[error("the model cannot reach its end state")]
    NoCompletion,
    #[error("trace {case_id} does not replay on the model (alignment cost {cost})")]
    NotReplayable { case_id: String, cost: u32 },
    #[error("no conformant trace available for replacement")]
    EmptyPool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum Move {
    Sync { activity: String, node: NodeId },
    ModelSkip { activity: String, node: NodeId },
    LogSkip { activity: String },
}

/// Model-side steps of an alignment, in execution order. Choice-free
/// gateways are implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Firing {
    Choice { split: NodeId, edge: EdgeId },
    Task { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub moves: Vec<Move>,
    pub cost: u32,
    pub firings: Vec<Firing>,
}

impl Alignment {
    pub fn is_conformant(&self) -> bool {
        self.cost == 0
    }

    pub fn has_model_skips(&self) -> bool {
        self.moves.iter().any(|m| matches!(m, Move::ModelSkip { .. }))
    }
}

#[derive(Clone, Copy)]
enum Step {
    Choice(NodeId, EdgeId),
    Sync(NodeId),
    ModelSkip(NodeId),
    LogSkip,
}

/// Minimum-cost alignment by 0-1 breadth-first search over (trace position,
/// settled marking). Synchronous moves and gateway choices cost 0, every
/// model or log skip costs 1. Once the end node holds a token only log
/// skips remain; tokens left elsewhere are ignored.
pub fn align_trace<S: AsRef<str>>(
    graph: &ProcessGraph,
    trace: &[S],
    state_limit: usize,
) -> Result<Alignment, ConformanceError> {
    type State = (usize, Marking<()>);
    let mut initial = Marking::initial(graph, ());
    let pending0 = initial.settle(graph).map_err(|_| ConformanceError::NoCompletion)?;

    let mut states: Vec<(State, Option<NodeId>)> = vec![((0, initial.clone()), pending0)];
    let mut index: HashMap<State, usize> = HashMap::from([((0, initial), 0)]);
    let mut dist: Vec<u32> = vec![0];
    let mut parent: Vec<Option<(usize, Step)>> = vec![None];
    let mut done = vec![false];
    let mut deque = VecDeque::from([0usize]);

    let label = |node: NodeId| graph.node(node).kind.label().unwrap_or_default().to_string();

    let goal = loop {
        let Some(cur) = deque.pop_front() else { return Err(ConformanceError::NoCompletion) };
        if done[cur] {
            continue;
        }
        done[cur] = true;
        let ((pos, marking), pending) = states[cur].clone();
        let d = dist[cur];
        if pos == trace.len() && pending.is_none() && marking.completed(graph) {
            break cur;
        }

        let mut successors: Vec<(State, Option<NodeId>, Step, u32)> = Vec::new();
        if let Some(split) = pending {
            for &e in graph.outgoing(split) {
                let mut m = marking.clone();
                m.choose(graph, split, e);
                if let Ok(p) = m.settle(graph) {
                    successors.push(((pos, m), p, Step::Choice(split, e), 0));
                }
            }
        } else {
            if !marking.completed(graph) {
                for task in marking.enabled_tasks(graph) {
                    let mut m = marking.clone();
                    m.fire_task(graph, task, ());
                    let Ok(p) = m.settle(graph) else { continue };
                    if pos < trace.len() && graph.node(task).kind.label() == Some(trace[pos].as_ref()) {
                        successors.push(((pos + 1, m.clone()), p, Step::Sync(task), 0));
                    }
                    successors.push(((pos, m), p, Step::ModelSkip(task), 1));
                }
            }
            if pos < trace.len() {
                successors.push(((pos + 1, marking.clone()), None, Step::LogSkip, 1));
            }
        }

        for (state, p, step, cost) in successors {
            let nd = d + cost;
            let id = match index.get(&state) {
                Some(&id) => {
                    if done[id] || dist[id] <= nd {
                        continue;
                    }
                    id
                }
                None => {
                    if states.len() >= state_limit {
                        return Err(ConformanceError::AlignmentTimeout { limit: state_limit });
                    }
                    states.push((state.clone(), p));
                    index.insert(state, states.len() - 1);
                    dist.push(u32::MAX);
                    parent.push(None);
                    done.push(false);
                    states.len() - 1
                }
            };
            dist[id] = nd;
            parent[id] = Some((cur, step));
            if cost == 0 {
                deque.push_front(id);
            } else {
                deque.push_back(id);
            }
        }
    };

    let mut steps = Vec::new();
    let mut at = goal;
    while let Some((prev, step)) = parent[at] {
        steps.push((prev, step));
        at = prev;
    }
    steps.reverse();
    let mut moves = Vec::new();
    let mut firings = Vec::new();
    for (prev, step) in steps {
        let pos = states[prev].0 .0;
        match step {
            Step::Choice(split, edge) => firings.push(Firing::Choice { split, edge }),
            Step::Sync(node) => {
                moves.push(Move::Sync { activity: label(node), node });
                firings.push(Firing::Task { node });
            }
            Step::ModelSkip(node) => {
                moves.push(Move::ModelSkip { activity: label(node), node });
                firings.push(Firing::Task { node });
            }
            Step::LogSkip => moves.push(Move::LogSkip { activity: trace[pos].as_ref().to_string() }),
        }
    }
    Ok(Alignment { moves, cost: dist[goal], firings })
}

/// The activity sequence along the alignment's model path. Without model
/// skips this is exactly the trace minus its log skips.
pub fn repair_trace(alignment: &Alignment) -> Vec<String> {
    alignment
        .moves
        .iter()
        .filter_map(|m| match m {
            Move::Sync { activity, .. } | Move::ModelSkip { activity, .. } => Some(activity.clone()),
            Move::LogSkip { .. } => None,
        })
        .collect()
}

/// Index of the pool member closest in edit distance; ties go to the
/// earliest member.
pub fn closest_in_pool<A: AsRef<str>, B: AsRef<str>>(trace: &[A], pool: &[Vec<B>]) -> Result<usize, ConformanceError> {
    let a: Vec<&str> = trace.iter().map(AsRef::as_ref).collect();
    pool.iter()
        .enumerate()
        .map(|(i, p)| {
            let b: Vec<&str> = p.iter().map(AsRef::as_ref).collect();
            (levenshtein(&a, &b), i)
        })
        .min()
        .map(|(_, i)| i)
        .ok_or(ConformanceError::EmptyPool)
}

pub fn replace_trace<S: AsRef<str>>(trace: &[S], pool: &[Vec<String>]) -> Result<Vec<String>, ConformanceError> {
    Ok(pool[closest_in_pool(trace, pool)?].clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NonConformance {
    #[default]
    Repair,
    Replace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BranchingMode {
    #[default]
    Equiprobable,
    Discovered,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceDiagnostics {
    pub conformant: usize,
    pub repaired: usize,
    pub replaced: usize,
    /// Traces that needed inserted activities and could not be timed.
    pub dropped: usize,
    pub alignment_timeouts: usize,
    pub clamped_waiting: usize,
}

/// Makes every sequence replayable on the graph. Alignment timeouts fall
/// back to replacement, or to dropping the sequence when there is nothing to
/// replace it with.
pub fn conform_sequences(
    graph: &ProcessGraph,
    sequences: &[Vec<String>],
    method: NonConformance,
    state_limit: usize,
) -> Result<(Vec<Vec<String>>, ConformanceDiagnostics), ConformanceError> {
    let mut diag = ConformanceDiagnostics::default();
    let mut alignments = Vec::with_capacity(sequences.len());
    for s in sequences {
        match align_trace(graph, s, state_limit) {
            Ok(a) => alignments.push(Some(a)),
            Err(ConformanceError::AlignmentTimeout { .. }) => {
                diag.alignment_timeouts += 1;
                alignments.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let pool: Vec<Vec<String>> = sequences
        .iter()
        .zip(&alignments)
        .filter(|(_, a)| a.as_ref().is_some_and(Alignment::is_conformant))
        .map(|(s, _)| s.clone())
        .collect();
    let mut out = Vec::with_capacity(sequences.len());
    for (s, a) in sequences.iter().zip(&alignments) {
        match (a, method) {
            (Some(a), _) if a.is_conformant() => {
                diag.conformant += 1;
                out.push(s.clone());
            }
            (Some(a), NonConformance::Repair) => {
                diag.repaired += 1;
                out.push(repair_trace(a));
            }
            _ if pool.is_empty() => {
                if method == NonConformance::Replace {
                    return Err(ConformanceError::EmptyPool);
                }
                diag.dropped += 1;
            }
            _ => {
                diag.replaced += 1;
                out.push(replace_trace(s, &pool)?);
            }
        }
    }
    Ok((out, diag))
}

/// Timed counterpart of [`conform_sequences`]. Repair keeps a trace only
/// when it needs deletions alone; replacement copies the closest conformant
/// trace, shifted to the original case start.
pub fn conform_log(
    graph: &ProcessGraph,
    log: &EventLog,
    method: NonConformance,
    state_limit: usize,
) -> Result<(EventLog, ConformanceDiagnostics), ConformanceError> {
    let mut diag = ConformanceDiagnostics::default();
    let mut alignments = Vec::with_capacity(log.len());
    for t in log.traces() {
        match align_trace(graph, &t.activities(), state_limit) {
            Ok(a) => alignments.push(Some(a)),
            Err(ConformanceError::AlignmentTimeout { .. }) => {
                diag.alignment_timeouts += 1;
                alignments.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let pool: Vec<&Trace> = log
        .traces()
        .iter()
        .zip(&alignments)
        .filter(|(_, a)| a.as_ref().is_some_and(Alignment::is_conformant))
        .map(|(t, _)| t)
        .collect();
    let pool_seqs: Vec<Vec<String>> = pool.iter().map(|t| t.activities()).collect();

    let mut traces = Vec::with_capacity(log.len());
    for (t, a) in log.traces().iter().zip(&alignments) {
        match (a, method) {
            (Some(a), _) if a.is_conformant() => {
                diag.conformant += 1;
                traces.push(t.clone());
            }
            (Some(a), NonConformance::Repair) => {
                if a.has_model_skips() {
                    diag.dropped += 1;
                    continue;
                }
                let kept = sync_events(t, a);
                if kept.is_empty() {
                    diag.dropped += 1;
                    continue;
                }
                diag.repaired += 1;
                traces.push(Trace::new(t.case_id(), kept).expect("subset of a valid trace"));
            }
            _ if pool.is_empty() => {
                if method == NonConformance::Replace {
                    return Err(ConformanceError::EmptyPool);
                }
                diag.dropped += 1;
            }
            _ => {
                diag.replaced += 1;
                let source = pool[closest_in_pool(&t.activities(), &pool_seqs)?];
                let shift = t.start() - source.start();
                let events = source
                    .events()
                    .iter()
                    .map(|e| Event { start: e.start + shift, end: e.end + shift, ..e.clone() })
                    .collect();
                traces.push(Trace::new(t.case_id(), events).expect("shifted copy of a valid trace"));
            }
        }
    }
    Ok((EventLog::new(traces).expect("case ids stay unique"), diag))
}

/// Events of the trace matched by synchronous moves.
fn sync_events(trace: &Trace, alignment: &Alignment) -> Vec<Event> {
    let mut pos = 0;
    let mut kept = Vec::new();
    for m in &alignment.moves {
        match m {
            Move::Sync { .. } => {
                kept.push(trace.events()[pos].clone());
                pos += 1;
            }
            Move::LogSkip { .. } => pos += 1,
            Move::ModelSkip { .. } => {}
        }
    }
    kept
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTiming {
    pub activity: String,
    pub enablement: Timestamp,
    pub start: Timestamp,
    pub end: Timestamp,
    pub processing_secs: i64,
    pub waiting_secs: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub case_id: String,
    pub fitted: bool,
    pub activities: Vec<ActivityTiming>,
    pub clamped: usize,
}

/// Replays a trace with token timestamps. A task's enablement is the time on
/// the token it consumes: the end of its predecessor, the latest branch end
/// through an AND-join, or the case start for the first task.
pub fn replay_with_times(
    graph: &ProcessGraph,
    trace: &Trace,
    state_limit: usize,
) -> Result<ReplayResult, ConformanceError> {
    let alignment = align_trace(graph, &trace.activities(), state_limit)?;
    if !alignment.is_conformant() {
        return Err(ConformanceError::NotReplayable { case_id: trace.case_id().to_string(), cost: alignment.cost });
    }
    let mut marking = Marking::initial(graph, trace.start().timestamp());
    marking.settle(graph).map_err(|_| ConformanceError::NoCompletion)?;
    let mut events = trace.events().iter();
    let mut activities = Vec::with_capacity(trace.len());
    let mut clamped = 0;
    for firing in &alignment.firings {
        match *firing {
            Firing::Choice { split, edge } => marking.choose(graph, split, edge),
            Firing::Task { node } => {
                let e = events.next().expect("cost-0 alignment has one firing per event");
                let enabled = marking.fire_task(graph, node, e.end.timestamp());
                let raw = e.start.timestamp() - enabled;
                if raw < 0 {
                    clamped += 1;
                }
                activities.push(ActivityTiming {
                    activity: e.activity.clone(),
                    enablement: chrono::DateTime::from_timestamp(enabled, 0).expect("in range"),
                    start: e.start,
                    end: e.end,
                    processing_secs: e.processing_secs(),
                    waiting_secs: raw.max(0),
                });
            }
        }
        marking.settle(graph).map_err(|_| ConformanceError::NoCompletion)?;
    }
    Ok(ReplayResult { case_id: trace.case_id().to_string(), fitted: true, activities, clamped })
}

/// Annotates XOR-split out-edges. Discovered mode counts branch choices along
/// each sequence's cost-0 alignment; splits never reached stay equiprobable.
pub fn compute_branching_probabilities(
    graph: &ProcessGraph,
    sequences: &[Vec<String>],
    mode: BranchingMode,
    state_limit: usize,
) -> Result<StochasticProcessModel, ConformanceError> {
    let equi = StochasticProcessModel::equiprobable(graph.clone());
    if mode == BranchingMode::Equiprobable {
        return Ok(equi);
    }
    let mut counts: BTreeMap<EdgeId, u64> = BTreeMap::new();
    for (i, s) in sequences.iter().enumerate() {
        let a = align_trace(graph, s, state_limit)?;
        if !a.is_conformant() {
            return Err(ConformanceError::NotReplayable { case_id: format!("sequence {i}"), cost: a.cost });
        }
        for f in a.firings {
            if let Firing::Choice { edge, .. } = f {
                *counts.entry(edge).or_insert(0) += 1;
            }
        }
    }
    let mut probs = equi.probabilities().clone();
    for split in graph.xor_splits() {
        let outs = graph.outgoing(split);
        let total: u64 = outs.iter().map(|e| counts.get(e).copied().unwrap_or(0)).sum();
        if total > 0 {
            for &e in outs {
                probs.insert(e, counts.get(&e).copied().unwrap_or(0) as f64 / total as f64);
            }
        }
    }
    Ok(StochasticProcessModel::new(graph.clone(), probs).expect("counts normalise per split"))
}
