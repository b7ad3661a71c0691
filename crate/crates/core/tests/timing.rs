use std::collections::BTreeMap;

use chrono::{Duration, TimeZone, Utc};
use prosim::conformance::DEFAULT_STATE_LIMIT;
use prosim::embedding::{pretrain_embeddings, EmbeddingConfig};
use prosim::eventlog::{Event, EventLog, Timestamp, Trace};
use prosim::graph::{NodeKind, ProcessGraph};
use prosim::synthetic::{generate_ground_truth, ground_truth_model, GroundTruthConfig};
use prosim::timing::{build_time_dataset, replay_log, scaling_of, train_time_model, TimeGridConfig};
use prosim_neural::{Activation, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ground-truth sequences with random gaps and durations. The AND branches
/// run one after the other in log order.
fn jittered_log(seed: u64) -> EventLog {
    let base = generate_ground_truth(&GroundTruthConfig { traces: 30, seed, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces = base
        .traces()
        .iter()
        .map(|t| {
            let mut clock = t.start();
            let events = t
                .events()
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    if i > 0 {
                        clock += Duration::seconds(rng.random_range(0..900));
                    }
                    let start = clock;
                    clock += Duration::seconds(rng.random_range(0..1800));
                    Event::new(e.activity.clone(), start, clock)
                })
                .collect();
            Trace::new(t.case_id(), events).unwrap()
        })
        .collect();
    EventLog::new(traces).unwrap()
}

/// Enablement from the model's shape: A at case start, the choice after A,
/// both AND branches after the choice, D after the later branch.
fn oracle_enablement(trace: &Trace, i: usize) -> Timestamp {
    let events = trace.events();
    let end_of = |labels: &[&str]| {
        events.iter().filter(|e| labels.contains(&e.activity.as_str())).map(|e| e.end).max().unwrap()
    };
    match events[i].activity.as_str() {
        "A" => trace.start(),
        "X" | "Y" => end_of(&["A"]),
        "B" | "C" => end_of(&["X", "Y"]),
        "D" => end_of(&["B", "C"]),
        other => panic!("unexpected activity {other}"),
    }
}

#[test]
fn dataset_targets_match_an_independent_replay() {
    let log = jittered_log(5);
    let model = ground_truth_model(0.7);
    let replays = replay_log(model.graph(), &log, DEFAULT_STATE_LIMIT).unwrap();
    let embeddings = pretrain_embeddings(&log.sequences(), 3, 0, &EmbeddingConfig { epochs: 5, ..Default::default() }).unwrap();
    let scaling = scaling_of(&replays);
    let dataset = build_time_dataset(&replays, &embeddings, 4, scaling).unwrap();
    assert_eq!(dataset.examples.len(), log.num_events());

    let mut expected = BTreeMap::new();
    let (mut max_p, mut max_w) = (0i64, 0i64);
    for t in log.traces() {
        for (i, e) in t.events().iter().enumerate() {
            let p = (e.end - e.start).num_seconds();
            let w = (e.start - oracle_enablement(t, i)).num_seconds();
            max_p = max_p.max(p);
            max_w = max_w.max(w);
            expected.insert((t.case_id().to_string(), i), (p, w));
        }
    }
    for ex in &dataset.examples {
        let (p, w) = expected[&(ex.case_id.clone(), ex.position)];
        assert!((ex.sample.target[0] - p as f64 / max_p as f64).abs() < 1e-12, "{} #{}", ex.case_id, ex.position);
        assert!((ex.sample.target[1] - w as f64 / max_w as f64).abs() < 1e-12, "{} #{}", ex.case_id, ex.position);
    }
}

fn linear_log(traces: usize) -> EventLog {
    let t0 = Utc.with_ymd_and_hms(2023, 3, 6, 9, 0, 0).unwrap();
    let traces = (0..traces)
        .map(|c| {
            let mut clock = t0 + Duration::seconds(c as i64 * 1800);
            let events = ["A", "B", "C"]
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if i > 0 {
                        clock += Duration::seconds(60);
                    }
                    let start = clock;
                    clock += Duration::seconds(120);
                    Event::new(*a, start, clock)
                })
                .collect();
            Trace::new(format!("c{c}"), events).unwrap()
        })
        .collect();
    EventLog::new(traces).unwrap()
}

fn linear_graph() -> ProcessGraph {
    let mut b = ProcessGraph::builder();
    let s = b.node(NodeKind::Start);
    let (a, bb, c) = (b.task("A"), b.task("B"), b.task("C"));
    let e = b.node(NodeKind::End);
    b.chain(&[s, a, bb, c, e]);
    b.build().unwrap()
}

#[test]
fn constant_targets_are_learned() {
    let log = linear_log(10);
    let replays = replay_log(&linear_graph(), &log, DEFAULT_STATE_LIMIT).unwrap();
    let embeddings = pretrain_embeddings(&log.sequences(), 3, 0, &EmbeddingConfig { epochs: 20, ..Default::default() }).unwrap();
    let grid = TimeGridConfig {
        units: vec![8],
        activations: vec![Activation::Tanh],
        ngrams: vec![3],
        train: TrainConfig { epochs: 150, batch_size: 4, patience: 150, seed: 1, ..Default::default() },
        validation_ratio: 0.0,
        ..Default::default()
    };
    let (model, report) = train_time_model(&replays, &embeddings, &grid).unwrap();
    assert_eq!(report.candidates.len(), 1);
    let steps = model.predict_times(&["A", "B", "C"], log.traces()[0].start()).unwrap();
    // scaled targets: processing 120/120 = 1, waiting 0 for A and 60/60 = 1 after
    for (i, s) in steps.iter().enumerate() {
        let w = if i == 0 { 0.0 } else { 1.0 };
        assert!((s.processing_secs as f64 / 120.0 - 1.0).abs() <= 0.02, "{i}: {s:?}");
        assert!((s.waiting_secs as f64 / 60.0 - w).abs() <= 0.02, "{i}: {s:?}");
    }
}
