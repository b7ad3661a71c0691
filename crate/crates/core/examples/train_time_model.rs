// Trains the timestamp model over a small grid and predicts the times of
// one sequence.
//
// `cargo run --release --example train_time_model`

use prosim::conformance::DEFAULT_STATE_LIMIT;
use prosim::embedding::{default_dim, pretrain_embeddings, EmbeddingConfig};
use prosim::synthetic::{generate_ground_truth, ground_truth_model, GroundTruthConfig};
use prosim::timing::{replay_log, train_time_model, TimeGridConfig};
use prosim_neural::{Activation, TrainConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let log = generate_ground_truth(&GroundTruthConfig { traces: 100, ..Default::default() })?;
    let model = ground_truth_model(0.7);
    let replays = replay_log(model.graph(), &log, DEFAULT_STATE_LIMIT)?;
    let embeddings = pretrain_embeddings(&log.sequences(), default_dim(log.alphabet().len()), 0, &EmbeddingConfig::default())?;

    let grid = TimeGridConfig {
        units: vec![16],
        activations: vec![Activation::Tanh, Activation::Selu],
        ngrams: vec![3, 5],
        train: TrainConfig { epochs: 30, patience: 5, batch_size: 16, ..Default::default() },
        ..Default::default()
    };
    let (time, report) = train_time_model(&replays, &embeddings, &grid)?;
    for c in &report.candidates {
        println!("{:>3} {:?} n={:<2} validation MAE {:?}", c.units, c.activation, c.ngram, c.validation_mae);
    }
    println!("winner: candidate {}", report.winner);

    let trace = &log.traces()[0];
    for (a, p) in trace.activities().iter().zip(time.predict_times(&trace.activities(), trace.start())?) {
        println!("{a}: wait {}s, work {}s", p.waiting_secs, p.processing_secs);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
