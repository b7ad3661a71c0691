// Samples activity sequences from a stochastic model and scores them
// against the log they came from.
//
// `cargo run --example generate_sequences`

use prosim::simulation::{cfls, generate_sequences};
use prosim::synthetic::{generate_ground_truth, ground_truth_model, GroundTruthConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let model = ground_truth_model(0.7);
    let sequences = generate_sequences(&model, 200, 16, 42)?;
    let x = sequences.iter().filter(|s| s.iter().any(|a| a == "X")).count();
    println!("{} of {} sequences took X", x, sequences.len());
    for s in sequences.iter().take(5) {
        println!("  {}", s.join(" "));
    }

    let reference = generate_ground_truth(&GroundTruthConfig { traces: 200, ..Default::default() })?;
    println!("CFLS against the reference: {:.4}", cfls(&sequences, &reference.sequences())?);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
