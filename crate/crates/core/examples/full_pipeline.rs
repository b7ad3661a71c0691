// Runs discovery, training, simulation and evaluation end to end and
// writes a project directory.
//
// `cargo run --release --example full_pipeline [out-dir]`

use prosim::eventlog::log_to_csv_string;
use prosim::pipeline::{run_pipeline, PipelineConfig};
use prosim::search::SearchConfig;
use prosim::synthetic::{generate_ground_truth, GroundTruthConfig};
use prosim_neural::TrainConfig;

pub fn run(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let out = args.first().cloned().unwrap_or_else(|| "target/full-pipeline".into());
    std::fs::create_dir_all(&out)?;
    let input = std::path::Path::new(&out).join("ground-truth.csv");
    let log = generate_ground_truth(&GroundTruthConfig { traces: 300, seed: 3, ..Default::default() })?;
    std::fs::write(&input, log_to_csv_string(&log))?;

    let mut config = PipelineConfig {
        runs: 3,
        search: SearchConfig { trials: 5, runs_per_trial: 2, ..Default::default() },
        ..Default::default()
    };
    config.time.units = vec![16];
    config.time.max_examples = Some(200);
    config.time.train = TrainConfig { epochs: 10, patience: 3, batch_size: 8, learning_rate: 0.01, ..Default::default() };

    let output = run_pipeline(&input, &config, &std::path::Path::new(&out).join("project"))?;
    let r = &output.report;
    println!("train {} / test {} traces, structure {:?}", r.train_traces, r.test_traces, r.structure);
    for run in &r.runs {
        println!("run {}: MAE {:.1}s EMD {:.4} CFLS {:.4}", run.run, run.metrics.mae_s, run.metrics.emd, run.metrics.cfls);
    }
    println!("mean: {:?}", r.mean);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run(&std::env::args().skip(1).collect::<Vec<_>>())
}
