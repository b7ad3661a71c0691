// Discovers a process graph from a log and attaches branching probabilities.
//
// `cargo run --example discover_model [log.csv]`

use prosim::conformance::{BranchingMode, DEFAULT_STATE_LIMIT};
use prosim::eventlog::{read_log_file, CsvFormat};
use prosim::search::{build_model, StructureConfig};
use prosim::synthetic::{generate_ground_truth, GroundTruthConfig};

pub fn run(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let log = match args.first() {
        Some(path) => read_log_file(path.as_ref(), &CsvFormat::default())?,
        None => generate_ground_truth(&GroundTruthConfig { traces: 300, ..Default::default() })?,
    };
    // keep every arc: the Y branch is infrequent enough to be filtered out
    let config = StructureConfig { epsilon: 0.0, branching: BranchingMode::Discovered, ..StructureConfig::BASELINE };
    let (model, diagnostics) = build_model(&log, &config, DEFAULT_STATE_LIMIT)?;

    let graph = model.graph();
    println!("{} nodes, {} edges", graph.nodes().len(), graph.edges().len());
    for (edge, p) in model.probabilities() {
        let e = graph.edge(*edge);
        println!("{} -> {}: {p:.3}", graph.describe(e.source), graph.describe(e.target));
    }
    println!("{diagnostics:?}");
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run(&std::env::args().skip(1).collect::<Vec<_>>())
}
