// Adds an activity that was never observed: the time model gets an
// embedding for it, the graph gets a task, and the edited scenario is
// simulated through the same routes the HTTP service exposes.
//
// `cargo run --release --example what_if`

use prosim::graph::StochasticProcessModel;
use prosim::pipeline::{persist, run_pipeline_on, PipelineConfig};
use prosim::project::ProjectStore;
use prosim::search::SearchConfig;
use prosim::service::Service;
use prosim::synthetic::{generate_ground_truth, GroundTruthConfig};
use prosim_neural::TrainConfig;
use serde_json::json;

const JSON: Option<&str> = Some("application/json");

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let log = generate_ground_truth(&GroundTruthConfig { traces: 120, ..Default::default() })?;
    let mut config = PipelineConfig { runs: 1, search: SearchConfig { trials: 2, runs_per_trial: 1, ..Default::default() }, ..Default::default() };
    config.time.units = vec![8];
    config.time.ngrams = vec![5];
    config.time.train = TrainConfig { epochs: 5, patience: 2, ..Default::default() };
    let output = run_pipeline_on(&log, &config)?;

    let dir = tempfile::tempdir()?;
    let store = ProjectStore::create(dir.path())?;
    persist(&store, &log, &output, &config)?;
    let mut service = Service::open(store)?;

    let add = json!({ "label": "Review", "examples": [["A", "Review", "X", "B", "C", "D"]] });
    let r = service.handle("POST", "/model/activities", JSON, add.to_string().as_bytes());
    println!("add activity: {}", r.status);

    let model = StochasticProcessModel::from_json(std::str::from_utf8(&service.handle("GET", "/model", None, b"").body)?)?;
    let a = model.graph().task_node("A").ok_or("no task A")?;
    let graph = model.graph().splice_task(model.graph().outgoing(a)[0], "Review")?;
    let edited = StochasticProcessModel::new(graph, model.probabilities().clone())?;
    println!("edit model: {}", service.handle("PUT", "/model", JSON, edited.to_json().as_bytes()).status);

    let r = service.handle("POST", "/simulate", JSON, br#"{"n": 25, "seed": 1}"#);
    let id = r.body_json()["run_id"].as_u64().ok_or("no run id")?;
    let metrics = service.handle("GET", &format!("/runs/{id}/metrics"), None, b"").body_json();
    println!("MAE {} EMD {} CFLS {}", metrics["mae_s"], metrics["emd"], metrics["cfls"]);
    let csv = String::from_utf8(service.handle("GET", &format!("/runs/{id}/log"), None, b"").body)?;
    println!("{}", csv.lines().take(8).collect::<Vec<_>>().join("\n"));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
