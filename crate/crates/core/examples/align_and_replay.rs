// Aligns a deviating trace with a model, repairs it and replays a
// conforming trace with timestamps.
//
// `cargo run --example align_and_replay`

use prosim::conformance::{align_trace, repair_trace, replay_with_times, Move, DEFAULT_STATE_LIMIT};
use prosim::synthetic::{generate_ground_truth, ground_truth_model, GroundTruthConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let model = ground_truth_model(0.7);
    let graph = model.graph();

    // C is missing and Z is not in the model
    let trace = ["A", "X", "Z", "B", "D"];
    let alignment = align_trace(graph, &trace, DEFAULT_STATE_LIMIT)?;
    println!("cost {}", alignment.cost);
    for m in &alignment.moves {
        match m {
            Move::Sync { activity, .. } => println!("  sync  {activity}"),
            Move::ModelSkip { activity, .. } => println!("  model {activity}"),
            Move::LogSkip { activity } => println!("  log   {activity}"),
        }
    }
    println!("repaired: {:?}", repair_trace(&alignment));

    let log = generate_ground_truth(&GroundTruthConfig { traces: 1, ..Default::default() })?;
    let replay = replay_with_times(graph, &log.traces()[0], DEFAULT_STATE_LIMIT)?;
    for a in &replay.activities {
        println!("{:>2} enabled {} waited {:>4}s worked {:>4}s", a.activity, a.enablement, a.waiting_secs, a.processing_secs);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
