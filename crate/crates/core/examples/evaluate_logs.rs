// Compares two logs: cycle-time MAE, hour-of-week EMD and CFLS.
//
// `cargo run --example evaluate_logs [simulated.csv reference.csv]`

use prosim::evaluation::{evaluate_logs, hour_of_week_histogram, TimestampSelection};
use prosim::eventlog::{read_log_file, CsvFormat};
use prosim::synthetic::{generate_ground_truth, GroundTruthConfig};

pub fn run(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let (simulated, reference) = if let [a, b] = args {
        (read_log_file(a.as_ref(), &CsvFormat::default())?, read_log_file(b.as_ref(), &CsvFormat::default())?)
    } else {
        let g = generate_ground_truth(&GroundTruthConfig { traces: 100, x_probability: 0.5, seed: 1, ..Default::default() })?;
        let r = generate_ground_truth(&GroundTruthConfig { traces: 100, seed: 2, ..Default::default() })?;
        (g, r)
    };
    let metrics = evaluate_logs(&simulated, &reference)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);

    let h = hour_of_week_histogram(&reference, TimestampSelection::StartAndEnd);
    let busiest = (0..h.len()).max_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap_or(0);
    println!("busiest reference hour: day {} hour {}", busiest / 24, busiest % 24);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run(&std::env::args().skip(1).collect::<Vec<_>>())
}
