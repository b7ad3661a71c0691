//! End-to-end runs: split, structure search, generator training, seeded
//! simulations and metrics against the held-out fold.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arrival::{
    extract_arrival_series, fit_multimodal, train_arrival_net, ArrivalModel, ArrivalNetConfig, ArrivalVariant,
    DEFAULT_MIN_SAMPLES,
};
use crate::conformance::{conform_log, NonConformance, DEFAULT_STATE_LIMIT};
use crate::embedding::{default_dim, pretrain_embeddings};
use crate::evaluation::{assemble_log, cycle_time_mae, emd_timestamps, Metrics};
use crate::eventlog::{log_to_csv_string, read_log_file, temporal_split, CsvFormat, EventLog, Timestamp};
use crate::graph::StochasticProcessModel;
use crate::project::{config_hash, ProjectStore};
use crate::search::{optimize_structure, SearchConfig, SearchReport, StructureConfig};
use crate::simulation::{cfls, generate_sequences};
use crate::timing::{replay_log, train_time_model, GridReport, TimeGridConfig, TimeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Split,
    Structure,
    Conformance,
    Arrival,
    Time,
    Simulation,
    Evaluation,
    Persist,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, message: impl std::fmt::Display) -> Self {
        Self { stage, message: message.to_string() }
    }

    /// Bad input or configuration, as opposed to a failed optimisation.
    pub fn is_validation(&self) -> bool {
        matches!(self.stage, Stage::Input | Stage::Split | Stage::Persist)
    }
}

fn at<E: std::fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::new(stage, e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Drives every stage: search, embeddings, network initialisation and
    /// simulation run `r`, which uses `seed + r`.
    pub seed: u64,
    pub split_ratio: f64,
    pub runs: usize,
    pub state_limit: usize,
    pub csv: CsvFormat,
    pub search: SearchConfig,
    pub arrival: ArrivalVariant,
    pub min_samples: usize,
    pub arrival_net: ArrivalNetConfig,
    pub time: TimeGridConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            split_ratio: 0.8,
            runs: 5,
            state_limit: DEFAULT_STATE_LIMIT,
            csv: CsvFormat::default(),
            search: SearchConfig::default(),
            arrival: ArrivalVariant::Multimodal,
            min_samples: DEFAULT_MIN_SAMPLES,
            arrival_net: ArrivalNetConfig::default(),
            time: TimeGridConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Arrival and timing generators trained for one process model.
#[derive(Debug, Clone, PartialEq)]
pub struct Generators {
    /// The table variant is always present; the network only when requested.
    pub arrivals: Vec<ArrivalModel>,
    pub time: TimeModel,
    pub grid: GridReport,
    /// Latest case start seen in training; the default simulation anchor.
    pub anchor: Timestamp,
    pub max_len: usize,
}

impl Generators {
    pub fn arrival(&self, variant: ArrivalVariant) -> Option<&ArrivalModel> {
        self.arrivals.iter().find(|a| a.variant() == variant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub train_traces: usize,
    pub time_examples: usize,
    pub anchor: Timestamp,
    pub variants: Vec<ArrivalVariant>,
    /// Longest sequence a simulation keeps.
    pub max_len: usize,
    pub grid: GridReport,
}

impl Generators {
    pub fn summary(&self, train_traces: usize) -> TrainSummary {
        TrainSummary {
            train_traces,
            time_examples: self.grid.train_examples + self.grid.validation_examples,
            anchor: self.anchor,
            variants: self.arrivals.iter().map(ArrivalModel::variant).collect(),
            max_len: self.max_len,
            grid: self.grid.clone(),
        }
    }
}

/// Trains the arrival table (and network, if asked) plus the time model.
/// The time model learns from the training log made conformant with
/// `nonconformance`.
pub fn train_generators(
    train: &EventLog,
    model: &StochasticProcessModel,
    nonconformance: NonConformance,
    config: &PipelineConfig,
) -> Result<Generators, PipelineError> {
    let series = extract_arrival_series(train);
    let mut arrivals = vec![ArrivalModel::Multimodal(fit_multimodal(&series, config.min_samples).map_err(at(Stage::Arrival))?)];
    if config.arrival == ArrivalVariant::Recurrent {
        let mut net = config.arrival_net.clone();
        net.train.seed = config.seed;
        arrivals.push(ArrivalModel::Recurrent(train_arrival_net(&series, &net).map_err(at(Stage::Arrival))?));
    }

    let (conformant, _) = conform_log(model.graph(), train, nonconformance, config.state_limit).map_err(at(Stage::Conformance))?;
    let replays = replay_log(model.graph(), &conformant, config.state_limit).map_err(at(Stage::Conformance))?;
    let sequences = train.sequences();
    let dim = config.time.embedding_dim.unwrap_or_else(|| default_dim(train.alphabet().len()));
    let embeddings = pretrain_embeddings(&sequences, dim, config.seed, &config.time.embedding).map_err(at(Stage::Time))?;
    let mut grid = config.time.clone();
    grid.train.seed = config.seed;
    let (time, grid_report) = train_time_model(&replays, &embeddings, &grid).map_err(at(Stage::Time))?;
    let anchor = train.traces().iter().map(|t| t.start()).max().ok_or_else(|| PipelineError::new(Stage::Arrival, "empty log"))?;
    let longest = train.traces().iter().map(|t| t.len()).max().unwrap_or(1);
    let max_len = config.search.max_len.unwrap_or(2 * longest).max(1);
    Ok(Generators { arrivals, time, grid: grid_report, anchor, max_len })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub num_cases: usize,
    pub seed: u64,
    pub arrival_variant: ArrivalVariant,
    pub start_anchor: Timestamp,
    /// Longest sequence kept; longer runs are regenerated.
    pub max_len: usize,
}

pub fn simulate(
    model: &StochasticProcessModel,
    generators: &Generators,
    config: &SimulationConfig,
) -> Result<EventLog, PipelineError> {
    if config.num_cases == 0 {
        return Err(PipelineError::new(Stage::Input, "num_cases must be at least 1"));
    }
    let arrival = generators.arrival(config.arrival_variant).ok_or_else(|| {
        PipelineError::new(Stage::Input, format!("no {:?} arrival model has been trained", config.arrival_variant))
    })?;
    let sequences =
        generate_sequences(model, config.num_cases, config.max_len, config.seed).map_err(at(Stage::Simulation))?;
    let arrivals =
        arrival.generate(config.num_cases, config.start_anchor, config.seed).map_err(at(Stage::Simulation))?;
    assemble_log(&sequences, &arrivals, &generators.time).map_err(at(Stage::Simulation))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub metrics: Metrics,
    pub padded_traces: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub train_traces: usize,
    pub test_traces: usize,
    pub structure: StructureConfig,
    pub search: SearchReport,
    pub train: TrainSummary,
    pub runs: Vec<RunReport>,
    pub mean: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub model: StochasticProcessModel,
    pub generators: Generators,
    pub simulated: Vec<EventLog>,
    pub test: EventLog,
    pub report: PipelineReport,
}

/// Reads the log at `log_path`, runs [`run_pipeline_on`] and persists every
/// artifact under `project`.
pub fn run_pipeline(log_path: &Path, config: &PipelineConfig, project: &Path) -> Result<PipelineOutput, PipelineError> {
    let log = read_log_file(log_path, &config.csv).map_err(at(Stage::Input))?;
    let output = run_pipeline_on(&log, config)?;
    let store = ProjectStore::create(project).map_err(at(Stage::Persist))?;
    persist(&store, &log, &output, config).map_err(at(Stage::Persist))?;
    Ok(output)
}

pub fn run_pipeline_on(log: &EventLog, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    if config.runs == 0 {
        return Err(PipelineError::new(Stage::Input, "runs must be at least 1"));
    }
    let (train, test) = temporal_split(log, config.split_ratio).map_err(at(Stage::Split))?;
    if test.is_empty() {
        return Err(PipelineError::new(Stage::Split, "the test fold is empty"));
    }
    let search = SearchConfig { seed: config.seed, state_limit: config.state_limit, ..config.search.clone() };
    let (model, search_report) = optimize_structure(&train, &search).map_err(at(Stage::Structure))?;
    let structure = search_report.trials[search_report.winner].config;
    let mut generators = train_generators(&train, &model, structure.nonconformance, config)?;
    // simulated cases start where the test fold starts
    let anchor = test.traces_by_start()[0].start();
    generators.anchor = anchor;
    let max_len = generators.max_len;
    let reference = test.sequences();

    let mut simulated = Vec::with_capacity(config.runs);
    let mut runs = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let seed = config.seed.wrapping_add(run as u64);
        let sim = SimulationConfig {
            num_cases: test.len(),
            seed,
            arrival_variant: config.arrival,
            start_anchor: anchor,
            max_len,
        };
        let log = simulate(&model, &generators, &sim)?;
        let mae = cycle_time_mae(&log, &test).map_err(at(Stage::Evaluation))?;
        let metrics = Metrics {
            mae_s: mae.mae_secs,
            emd: emd_timestamps(&log, &test),
            cfls: cfls(&log.sequences(), &reference).map_err(at(Stage::Evaluation))?,
        };
        runs.push(RunReport { run, seed, metrics, padded_traces: mae.padded });
        simulated.push(log);
    }
    let n = runs.len() as f64;
    let mean = Metrics {
        mae_s: runs.iter().map(|r| r.metrics.mae_s).sum::<f64>() / n,
        emd: runs.iter().map(|r| r.metrics.emd).sum::<f64>() / n,
        cfls: runs.iter().map(|r| r.metrics.cfls).sum::<f64>() / n,
    };
    let train_summary = generators.summary(train.len());
    let report = PipelineReport {
        config_hash: config.hash(),
        train_traces: train.len(),
        test_traces: test.len(),
        structure,
        search: search_report,
        train: train_summary,
        runs,
        mean,
    };
    Ok(PipelineOutput { model, generators, simulated, test, report })
}

/// Writes the model, generators, reports and simulated logs.
pub fn persist(
    store: &ProjectStore,
    input: &EventLog,
    output: &PipelineOutput,
    config: &PipelineConfig,
) -> std::io::Result<()> {
    let hash = config.hash();
    store.write(ProjectStore::INPUT, log_to_csv_string(input).as_bytes(), &hash)?;
    store.write_json("config.json", config, &hash)?;
    store.write(ProjectStore::MODEL, output.model.to_json().as_bytes(), &hash)?;
    store.write_json(ProjectStore::STRUCTURE, &output.report.structure, &hash)?;
    save_generators(store, &output.generators, &hash)?;
    store.write_json(ProjectStore::SEARCH_REPORT, &output.report.search, &hash)?;
    store.write_json(ProjectStore::TRAIN_REPORT, &output.report.train, &hash)?;
    store.write_json(ProjectStore::PIPELINE_REPORT, &output.report, &hash)?;
    for (i, log) in output.simulated.iter().enumerate() {
        let name = format!("simulated/run-{}.csv", i + 1);
        store.write(&name, log_to_csv_string(log).as_bytes(), &hash)?;
    }
    Ok(())
}

pub fn save_generators(store: &ProjectStore, generators: &Generators, hash: &str) -> std::io::Result<()> {
    for a in &generators.arrivals {
        let dir = store.arrival_dir(a.variant());
        std::fs::create_dir_all(&dir)?;
        a.save(&dir).map_err(std::io::Error::other)?;
        let rel = dir.strip_prefix(store.root()).expect("inside the project");
        store.record(&rel.to_string_lossy(), hash)?;
    }
    std::fs::create_dir_all(store.time_dir())?;
    generators.time.save(&store.time_dir()).map_err(std::io::Error::other)?;
    store.record(ProjectStore::TIME_DIR, hash)
}

/// Loads what [`save_generators`] and the train summary wrote.
pub fn load_generators(store: &ProjectStore) -> Result<Generators, PipelineError> {
    let summary: TrainSummary = store.read_json(ProjectStore::TRAIN_REPORT).map_err(at(Stage::Input))?;
    let arrivals = summary
        .variants
        .iter()
        .map(|&v| ArrivalModel::load(&store.arrival_dir(v)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at(Stage::Input))?;
    let time = TimeModel::load(&store.time_dir()).map_err(at(Stage::Input))?;
    Ok(Generators { arrivals, time, grid: summary.grid, anchor: summary.anchor, max_len: summary.max_len })
}

pub fn load_model(store: &ProjectStore) -> Result<StochasticProcessModel, PipelineError> {
    let text = std::fs::read_to_string(store.path(ProjectStore::MODEL)).map_err(at(Stage::Input))?;
    StochasticProcessModel::from_json(&text).map_err(at(Stage::Input))
}
