// Fits both arrival generators to a case-start series and compares their
// inter-arrival means.
//
// `cargo run --release --example fit_arrivals`

use prosim::arrival::{extract_arrival_series, fit_multimodal, generate_from_table, train_arrival_net, ArrivalNetConfig};
use prosim::synthetic::{generate_ground_truth, GroundTruthConfig};
use prosim_neural::TrainConfig;

fn mean_gap(starts: &[prosim::eventlog::Timestamp]) -> f64 {
    let total = (starts[starts.len() - 1] - starts[0]).num_seconds() as f64;
    total / (starts.len() - 1) as f64
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let log = generate_ground_truth(&GroundTruthConfig { traces: 600, ..Default::default() })?;
    let series = extract_arrival_series(&log);
    let start = log.traces_by_start()[0].start();

    let table = fit_multimodal(&series, 10)?;
    let fitted = table.cells.iter().filter(|c| matches!(c.fit, prosim::arrival::CellFit::Fitted { .. })).count();
    println!("global fit {:?}, {fitted} of 168 hourly cells fitted", table.global.distribution);
    println!("table mean gap {:.1}s", mean_gap(&generate_from_table(&table, 500, start, 1)));

    let config = ArrivalNetConfig { units: 16, train: TrainConfig { epochs: 20, patience: 5, ..Default::default() }, ..Default::default() };
    let net = train_arrival_net(&series, &config)?;
    println!("recurrent mean gap {:.1}s", mean_gap(&net.generate(500, start)?));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
