//! A small process with known parameters, for recovery checks and demos.
//!
//! `A`, then `X` (probability 0.7) or `Y`, then `B` and `C` in parallel, then
//! `D`. Cases arrive with exponential gaps. Every activity waits a fixed time
//! after the previous one ends and then takes a fixed processing time, so
//! the parallel pair runs one after the other in a random order.

use chrono::{Duration, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp};
use serde::{Deserialize, Serialize};

use crate::eventlog::{Event, EventLog, Timestamp, Trace};
use crate::graph::{NodeKind, ProcessGraph, StochasticProcessModel};
use crate::simulation::{generate_sequences, SimulationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruthConfig {
    pub traces: usize,
    /// Probability of taking `X` rather than `Y`.
    pub x_probability: f64,
    pub mean_interarrival_secs: f64,
    pub processing_secs: i64,
    pub waiting_secs: i64,
    /// Defaults to a Sunday midnight, so a week of cases ends before the
    /// Sunday-to-Monday wrap of the hour-of-week bins.
    pub start: Timestamp,
    pub seed: u64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            traces: 1000,
            x_probability: 0.7,
            mean_interarrival_secs: 600.0,
            processing_secs: 120,
            waiting_secs: 60,
            start: Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
            seed: 0,
        }
    }
}

pub fn ground_truth_model(x_probability: f64) -> StochasticProcessModel {
    let mut b = ProcessGraph::builder();
    let s = b.node(NodeKind::Start);
    let a = b.task("A");
    let split = b.node(NodeKind::XorSplit);
    let x = b.task("X");
    let y = b.task("Y");
    let join = b.node(NodeKind::XorJoin);
    let fork = b.node(NodeKind::AndSplit);
    let tb = b.task("B");
    let tc = b.task("C");
    let sync = b.node(NodeKind::AndJoin);
    let d = b.task("D");
    let e = b.node(NodeKind::End);
    b.chain(&[s, a, split]);
    let to_x = b.edge(split, x);
    let to_y = b.edge(split, y);
    b.chain(&[x, join]);
    b.chain(&[y, join, fork, tb, sync, d, e]);
    b.chain(&[fork, tc, sync]);
    let graph = b.build().expect("well-formed");
    let probabilities = [(to_x, x_probability), (to_y, 1.0 - x_probability)].into_iter().collect();
    StochasticProcessModel::new(graph, probabilities).expect("valid probabilities")
}

pub fn generate_ground_truth(config: &GroundTruthConfig) -> Result<EventLog, SimulationError> {
    let model = ground_truth_model(config.x_probability);
    let sequences = generate_sequences(&model, config.traces, 16, config.seed)?;
    let gaps = Exp::new(1.0 / config.mean_interarrival_secs)
        .map_err(|e| SimulationError::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xA5A5);
    let width = config.traces.to_string().len();
    let mut case_start = config.start;
    let mut traces = Vec::with_capacity(sequences.len());
    for (i, seq) in sequences.iter().enumerate() {
        if i > 0 {
            case_start += Duration::seconds(gaps.sample(&mut rng).round() as i64);
        }
        let mut clock = case_start;
        let events = seq
            .iter()
            .map(|a| {
                let start = clock + Duration::seconds(config.waiting_secs);
                clock = start + Duration::seconds(config.processing_secs);
                Event::new(a, start, clock)
            })
            .collect();
        traces.push(Trace::new(format!("case-{:0width$}", i + 1), events).expect("valid events"));
    }
    Ok(EventLog::new(traces).expect("unique case ids"))
}

/// Probability of the XOR out-edge leading straight to task `label`.
pub fn branch_probability_to(model: &StochasticProcessModel, label: &str) -> Option<f64> {
    let graph = model.graph();
    let node = graph.task_node(label)?;
    let edge = graph.incoming(node).first().copied()?;
    let source = graph.edge(edge).source;
    matches!(graph.node(source).kind, NodeKind::XorSplit).then(|| model.probability(edge)).flatten()
}
