//! Local JSON-over-HTTP access to a project for what-if editing.
//!
//! Routing is a pure function of the request ([`Service::handle`]), so it is
//! testable without sockets; [`serve`] adapts it to `tiny_http`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::arrival::ArrivalVariant;
use crate::embedding::{EmbeddingConfig, EmbeddingError};
use crate::evaluation::{evaluate_logs, hour_of_week_histogram, TimestampSelection};
use crate::eventlog::{log_to_csv_string, read_log_file, CsvFormat, EventLog, Timestamp};
use crate::graph::StochasticProcessModel;
use crate::pipeline::{load_generators, load_model, simulate, Generators, PipelineError, SimulationConfig, Stage};
use crate::project::ProjectStore;

/// What-if edits kept apart from the discovered model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Overlay {
    /// Replacement for the discovered model, if edited.
    pub model: Option<StochasticProcessModel>,
    /// Embeddings fitted for added activities.
    pub activities: BTreeMap<String, Vec<f64>>,
}

/// The discovered model and generators with the overlay applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: StochasticProcessModel,
    pub generators: Generators,
}

pub fn load_overlay(store: &ProjectStore) -> Result<Overlay, PipelineError> {
    if !store.path(ProjectStore::OVERLAY).exists() {
        return Ok(Overlay::default());
    }
    store.read_json(ProjectStore::OVERLAY).map_err(|e| PipelineError::new(Stage::Input, e))
}

/// Loads the project as the CLI and the service both simulate it.
pub fn load_scenario(store: &ProjectStore) -> Result<Scenario, PipelineError> {
    let overlay = load_overlay(store)?;
    let mut generators = load_generators(store)?;
    for (label, v) in &overlay.activities {
        generators.time.embeddings.vectors.insert(label.clone(), v.clone());
    }
    let model = match overlay.model {
        Some(m) => m,
        None => load_model(store)?,
    };
    Ok(Scenario { model, generators })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Response {
    fn json(status: u16, value: &Value) -> Self {
        Self { status, content_type: "application/json", body: serde_json::to_vec_pretty(value).expect("json") }
    }

    fn error(status: u16, message: impl std::fmt::Display) -> Self {
        Self::json(status, &json!({ "error": message.to_string() }))
    }

    pub fn body_json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct SimulateRequest {
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    arrival_variant: ArrivalVariant,
    start: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct ActivityRequest {
    label: String,
    examples: Vec<Vec<String>>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone)]
struct Run {
    log: EventLog,
    metrics: Value,
}

pub struct Service {
    store: ProjectStore,
    overlay: Overlay,
    reference: Option<EventLog>,
    runs: BTreeMap<u64, Run>,
    next_run: u64,
}

impl Service {
    /// Opens a trained project. The project's input log, when present, is
    /// the reference for run metrics.
    pub fn open(store: ProjectStore) -> Result<Self, PipelineError> {
        let overlay = load_overlay(&store)?;
        load_scenario(&store)?;
        let input = store.path(ProjectStore::INPUT);
        let reference = if input.exists() {
            Some(read_log_file(&input, &CsvFormat::default()).map_err(|e| PipelineError::new(Stage::Input, e))?)
        } else {
            None
        };
        Ok(Self { store, overlay, reference, runs: BTreeMap::new(), next_run: 1 })
    }

    pub fn handle(&mut self, method: &str, path: &str, content_type: Option<&str>, body: &[u8]) -> Response {
        let path = path.split('?').next().unwrap_or(path).trim_end_matches('/');
        if matches!(method, "POST" | "PUT") && !content_type.is_some_and(|c| c.starts_with("application/json")) {
            return Response::error(415, "request body must be application/json");
        }
        let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
        let result = match (method, segments.as_slice()) {
            ("GET", ["model"]) => self.get_model(),
            ("PUT", ["model"]) => self.put_model(body),
            ("POST", ["model", "activities"]) => self.add_activity(body),
            ("DELETE", ["model", "overlay"]) => self.reset_overlay(),
            ("POST", ["simulate"]) => self.simulate(body),
            ("GET", ["runs", id, "metrics"]) => self.run(id).map(|r| Response::json(200, &r.metrics)),
            ("GET", ["runs", id, "log"]) => self.run(id).map(|r| Response {
                status: 200,
                content_type: "text/csv",
                body: log_to_csv_string(&r.log).into_bytes(),
            }),
            (_, ["model"] | ["model", "activities"] | ["model", "overlay"] | ["simulate"])
            | (_, ["runs", _, "metrics" | "log"]) => Err(Response::error(405, format!("{method} not allowed on {path}"))),
            _ => Err(Response::error(404, format!("no route for {path}"))),
        };
        result.unwrap_or_else(|e| e)
    }

    fn scenario(&self) -> Result<Scenario, Response> {
        load_scenario(&self.store).map_err(|e| Response::error(500, e))
    }

    fn save_overlay(&self) -> Result<(), Response> {
        let hash = crate::project::config_hash(&self.overlay);
        self.store.write_json(ProjectStore::OVERLAY, &self.overlay, &hash).map_err(|e| Response::error(500, e))
    }

    fn get_model(&self) -> Result<Response, Response> {
        let s = self.scenario()?;
        let doc: Value = serde_json::from_str(&s.model.to_json()).expect("model json");
        Ok(Response::json(200, &doc))
    }

    fn put_model(&mut self, body: &[u8]) -> Result<Response, Response> {
        let text = std::str::from_utf8(body).map_err(|e| Response::error(400, e))?;
        let model = StochasticProcessModel::from_json(text).map_err(|e| Response::error(400, e))?;
        let s = self.scenario()?;
        if let Some(label) = model.graph().task_labels().into_iter().find(|l| !s.generators.time.embeddings.contains(l)) {
            return Err(Response::error(
                422,
                format!("activity {label:?} has no embedding; add it through POST /model/activities first"),
            ));
        }
        self.overlay.model = Some(model);
        self.save_overlay()?;
        self.get_model()
    }

    fn add_activity(&mut self, body: &[u8]) -> Result<Response, Response> {
        let req: ActivityRequest = serde_json::from_slice(body).map_err(|e| Response::error(400, e))?;
        let s = self.scenario()?;
        let table = s
            .generators
            .time
            .embeddings
            .extend(&req.label, &req.examples, req.seed, &EmbeddingConfig::default())
            .map_err(|e| match e {
                EmbeddingError::Duplicate(_) => Response::error(409, e),
                _ => Response::error(400, e),
            })?;
        let vector = table.vectors[&req.label].clone();
        self.overlay.activities.insert(req.label.clone(), vector.clone());
        self.save_overlay()?;
        Ok(Response::json(201, &json!({ "label": req.label, "vector": vector })))
    }

    fn reset_overlay(&mut self) -> Result<Response, Response> {
        self.overlay = Overlay::default();
        self.store.remove(ProjectStore::OVERLAY).map_err(|e| Response::error(500, e))?;
        Ok(Response { status: 204, content_type: "application/json", body: Vec::new() })
    }

    fn simulate(&mut self, body: &[u8]) -> Result<Response, Response> {
        let req: SimulateRequest = serde_json::from_slice(body).map_err(|e| Response::error(400, e))?;
        let s = self.scenario()?;
        let config = SimulationConfig {
            num_cases: req.n,
            seed: req.seed,
            arrival_variant: req.arrival_variant,
            start_anchor: req.start.unwrap_or(s.generators.anchor),
            max_len: s.generators.max_len,
        };
        let log = simulate(&s.model, &s.generators, &config).map_err(|e| {
            if e.is_validation() {
                Response::error(400, e)
            } else {
                Response::error(500, e)
            }
        })?;
        let metrics = self.metrics_for(&log);
        let id = self.next_run;
        self.next_run += 1;
        self.runs.insert(id, Run { log, metrics });
        Ok(Response::json(201, &json!({ "run_id": id, "status": "completed" })))
    }

    fn metrics_for(&self, log: &EventLog) -> Value {
        let simulated = hour_of_week_histogram(log, TimestampSelection::StartAndEnd);
        match &self.reference {
            Some(reference) => {
                let m = evaluate_logs(log, reference).ok();
                json!({
                    "mae_s": m.map(|m| m.mae_s),
                    "emd": m.map(|m| m.emd),
                    "cfls": m.map(|m| m.cfls),
                    "histograms": {
                        "simulated": simulated,
                        "reference": hour_of_week_histogram(reference, TimestampSelection::StartAndEnd),
                    },
                })
            }
            None => json!({ "mae_s": null, "emd": null, "cfls": null, "histograms": { "simulated": simulated } }),
        }
    }

    fn run(&self, id: &str) -> Result<&Run, Response> {
        id.parse::<u64>()
            .ok()
            .and_then(|id| self.runs.get(&id))
            .ok_or_else(|| Response::error(404, format!("no run {id}")))
    }
}

/// Binds `address` and serves requests one at a time until the process is
/// stopped.
pub fn serve(store: ProjectStore, address: &str) -> Result<(), PipelineError> {
    let service = Service::open(store)?;
    let server = tiny_http::Server::http(address).map_err(|e| PipelineError::new(Stage::Input, e))?;
    eprintln!("listening on http://{}", server.server_addr());
    serve_with(service, &server);
    Ok(())
}

/// Answers requests from `server` until it is unblocked or dropped.
pub fn serve_with(mut service: Service, server: &tiny_http::Server) {
    for mut request in server.incoming_requests() {
        let mut body = Vec::new();
        if let Err(e) = request.as_reader().read_to_end(&mut body) {
            eprintln!("read error: {e}");
            continue;
        }
        let content_type = request
            .headers()
            .iter()
            .find(|h| h.field.equiv("Content-Type"))
            .map(|h| h.value.as_str().to_string());
        let method = request.method().as_str().to_string();
        let url = request.url().to_string();
        let r = service.handle(&method, &url, content_type.as_deref(), &body);
        let header = tiny_http::Header::from_bytes("Content-Type", r.content_type).expect("static header");
        let response = tiny_http::Response::from_data(r.body).with_status_code(r.status).with_header(header);
        if let Err(e) = request.respond(response) {
            eprintln!("write error: {e}");
        }
    }
}
