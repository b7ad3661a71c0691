//! Processing and waiting time prediction from replay-derived n-gram windows.

use std::path::Path;

use chrono::Duration;
use prosim_neural::{
    mean_absolute_error, train, Activation, LayerSpec, NetworkSpec, NeuralError, Sample, TrainConfig, TrainedModel,
};
use serde::{Deserialize, Serialize};

use crate::conformance::{replay_with_times, ConformanceError, ReplayResult};
use crate::embedding::{EmbeddingConfig, EmbeddingError, EmbeddingTable};
use crate::eventlog::{seconds_of_day, weekday_index, EventLog, Timestamp};
use crate::graph::ProcessGraph;

#[derive(Debug, thiserror::Error)]
pub enum TimingError {
    #[error("replay of trace {case_id} failed: {source}")]
    Replay { case_id: String, source: ConformanceError },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("every grid configuration failed: {}", .0.join("; "))]
    AllFailed(Vec<String>),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Scalar slots per step before the embedding: processing, waiting, time of
/// day and a one-hot weekday.
pub const SCALAR_FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScaling {
    pub max_processing: f64,
    pub max_waiting: f64,
}

impl TimeScaling {
    fn divisor(x: f64) -> f64 {
        if x > 0.0 {
            x
        } else {
            1.0
        }
    }

    pub fn processing(&self, secs: f64) -> f64 {
        secs / Self::divisor(self.max_processing)
    }

    pub fn waiting(&self, secs: f64) -> f64 {
        secs / Self::divisor(self.max_waiting)
    }
}

fn step_row(processing: f64, waiting: f64, at: &Timestamp, embedding: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; SCALAR_FEATURES + embedding.len()];
    v[0] = processing;
    v[1] = waiting;
    v[2] = seconds_of_day(at) as f64 / 86_400.0;
    v[3 + weekday_index(at)] = 1.0;
    v[SCALAR_FEATURES..].copy_from_slice(embedding);
    v
}

/// Known history of one step: its label, enablement and scaled times.
struct Step<'a> {
    embedding: &'a [f64],
    enablement: Timestamp,
    processing: f64,
    waiting: f64,
}

/// Window of `ngram` rows ending at the last step, left-padded with zero
/// rows. The last step's own time slots are unknown and left at zero.
fn window(steps: &[Step], ngram: usize, width: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; width]; ngram.saturating_sub(steps.len())];
    let from = steps.len().saturating_sub(ngram);
    for (k, s) in steps[from..].iter().enumerate() {
        let current = from + k == steps.len() - 1;
        let (p, w) = if current { (0.0, 0.0) } else { (s.processing, s.waiting) };
        rows.push(step_row(p, w, &s.enablement, s.embedding));
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeExample {
    pub case_id: String,
    pub position: usize,
    pub start: Timestamp,
    pub sample: Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDataset {
    pub ngram: usize,
    pub scaling: TimeScaling,
    /// Ordered by activity start, then case, then position.
    pub examples: Vec<TimeExample>,
}

/// Replays every trace with timestamps.
pub fn replay_log(graph: &ProcessGraph, log: &EventLog, state_limit: usize) -> Result<Vec<ReplayResult>, TimingError> {
    log.traces()
        .iter()
        .map(|t| {
            replay_with_times(graph, t, state_limit)
                .map_err(|source| TimingError::Replay { case_id: t.case_id().to_string(), source })
        })
        .collect()
}

pub fn scaling_of(replays: &[ReplayResult]) -> TimeScaling {
    let all = replays.iter().flat_map(|r| &r.activities);
    TimeScaling {
        max_processing: all.clone().map(|a| a.processing_secs).max().unwrap_or(0) as f64,
        max_waiting: all.map(|a| a.waiting_secs).max().unwrap_or(0) as f64,
    }
}

/// One example per activity instance; the target is its scaled
/// (processing, waiting) pair, waiting measured from its enablement.
pub fn build_time_dataset(
    replays: &[ReplayResult],
    embeddings: &EmbeddingTable,
    ngram: usize,
    scaling: TimeScaling,
) -> Result<TimeDataset, TimingError> {
    if ngram == 0 {
        return Err(TimingError::Argument("n-gram size must be at least 1".into()));
    }
    let width = SCALAR_FEATURES + embeddings.dim;
    let mut examples = Vec::new();
    for r in replays {
        let mut steps = Vec::with_capacity(r.activities.len());
        for (i, a) in r.activities.iter().enumerate() {
            steps.push(Step {
                embedding: embeddings.get(&a.activity)?,
                enablement: a.enablement,
                processing: scaling.processing(a.processing_secs as f64),
                waiting: scaling.waiting(a.waiting_secs as f64),
            });
            let target = vec![steps[i].processing, steps[i].waiting];
            examples.push(TimeExample {
                case_id: r.case_id.clone(),
                position: i,
                start: a.start,
                sample: Sample::new(window(&steps, ngram, width), target),
            });
        }
    }
    examples.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.case_id.cmp(&b.case_id)).then(a.position.cmp(&b.position)));
    Ok(TimeDataset { ngram, scaling, examples })
}

pub fn time_network_spec(input_dim: usize, units: usize, activation: Activation, dropout: f64) -> Result<NetworkSpec, NeuralError> {
    NetworkSpec::new(
        input_dim,
        vec![
            LayerSpec::lstm(units, activation).with_dropout(dropout),
            LayerSpec::lstm(units, activation).with_dropout(dropout),
            LayerSpec::dense(2, Activation::Linear),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeGridConfig {
    pub units: Vec<usize>,
    pub activations: Vec<Activation>,
    pub ngrams: Vec<usize>,
    pub train: TrainConfig,
    pub dropout: f64,
    pub validation_ratio: f64,
    /// Evenly spaced subsample of the examples, to bound training cost.
    pub max_examples: Option<usize>,
    pub embedding: EmbeddingConfig,
    /// `None` uses `ceil(sqrt(alphabet)) + 1`.
    pub embedding_dim: Option<usize>,
}

impl Default for TimeGridConfig {
    fn default() -> Self {
        Self {
            units: vec![50, 100],
            activations: vec![Activation::Tanh, Activation::Selu],
            ngrams: vec![5, 10, 15],
            train: TrainConfig { epochs: 200, ..Default::default() },
            dropout: 0.0,
            validation_ratio: 0.2,
            max_examples: None,
            embedding: EmbeddingConfig::default(),
            embedding_dim: None,
        }
    }
}

impl TimeGridConfig {
    pub fn configurations(&self) -> Vec<(usize, Activation, usize)> {
        let mut out = Vec::new();
        for &u in &self.units {
            for &a in &self.activations {
                for &n in &self.ngrams {
                    out.push((u, a, n));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub units: usize,
    pub activation: Activation,
    pub ngram: usize,
    pub seed: u64,
    pub epochs_run: usize,
    pub validation_mae: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub train_examples: usize,
    pub validation_examples: usize,
    pub candidates: Vec<GridCandidate>,
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeModel {
    pub network: TrainedModel,
    pub embeddings: EmbeddingTable,
    pub scaling: TimeScaling,
    pub ngram: usize,
}

fn subsample<T: Clone>(items: &[T], max: Option<usize>) -> Vec<T> {
    match max {
        Some(m) if m > 0 && items.len() > m => (0..m).map(|k| items[k * items.len() / m].clone()).collect(),
        _ => items.to_vec(),
    }
}

/// Trains one candidate per grid point and keeps the lowest validation MAE
/// (earliest candidate on ties). Candidate `i` is seeded with `seed + i`.
pub fn train_time_model(
    replays: &[ReplayResult],
    embeddings: &EmbeddingTable,
    grid: &TimeGridConfig,
) -> Result<(TimeModel, GridReport), TimingError> {
    let configs = grid.configurations();
    if configs.is_empty() {
        return Err(TimingError::Argument("empty grid".into()));
    }
    let scaling = scaling_of(replays);
    let input_dim = SCALAR_FEATURES + embeddings.dim;
    let mut candidates = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, f64, TrainedModel, usize)> = None;
    let mut sizes = (0, 0);
    for (i, &(units, activation, ngram)) in configs.iter().enumerate() {
        let dataset = build_time_dataset(replays, embeddings, ngram, scaling)?;
        let samples: Vec<Sample> = subsample(&dataset.examples, grid.max_examples).into_iter().map(|e| e.sample).collect();
        if samples.is_empty() {
            return Err(TimingError::Argument("no activity instances to train on".into()));
        }
        let (train_set, validation) = crate::arrival::temporal_holdout(&samples, grid.validation_ratio);
        sizes = (train_set.len(), validation.len());
        let seed = grid.train.seed.wrapping_add(i as u64);
        let mut candidate =
            GridCandidate { units, activation, ngram, seed, epochs_run: 0, validation_mae: None, error: None };
        let outcome = time_network_spec(input_dim, units, activation, grid.dropout)
            .and_then(|spec| TrainedModel::init(spec, seed))
            .and_then(|m| train(m, &train_set, &validation, &TrainConfig { seed, ..grid.train.clone() }))
            .and_then(|m| {
                let score = mean_absolute_error(&m, if validation.is_empty() { &train_set } else { &validation })?;
                Ok((m, score))
            });
        match outcome {
            Ok((model, score)) => {
                candidate.epochs_run = model.history.len();
                candidate.validation_mae = Some(score);
                if best.as_ref().is_none_or(|b| score < b.1) {
                    best = Some((i, score, model, ngram));
                }
            }
            Err(e) => candidate.error = Some(e.to_string()),
        }
        candidates.push(candidate);
    }
    let Some((winner, _, network, ngram)) = best else {
        return Err(TimingError::AllFailed(
            candidates
                .iter()
                .map(|c| format!("{}x{:?}/n{}: {}", c.units, c.activation, c.ngram, c.error.clone().unwrap_or_default()))
                .collect(),
        ));
    };
    let model = TimeModel { network, embeddings: embeddings.clone(), scaling, ngram };
    Ok((model, GridReport { train_examples: sizes.0, validation_examples: sizes.1, candidates, winner }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedStep {
    pub processing_secs: i64,
    pub waiting_secs: i64,
}

pub const TIME_JSON: &str = "time.json";
pub const TIME_WEIGHTS: &str = "time.weights";

#[derive(Serialize, Deserialize)]
struct TimeDocument {
    embeddings: EmbeddingTable,
    scaling: TimeScaling,
    ngram: usize,
}

impl TimeModel {
    /// Iterative rollout from the case start: each step is enabled when the
    /// previous one ends, and its predicted times feed the next window.
    /// Negative predictions become zero; times are whole seconds.
    pub fn predict_times<S: AsRef<str>>(&self, sequence: &[S], case_start: Timestamp) -> Result<Vec<PredictedStep>, TimingError> {
        for a in sequence {
            self.embeddings.get(a.as_ref())?;
        }
        let width = SCALAR_FEATURES + self.embeddings.dim;
        let mut steps: Vec<Step> = Vec::with_capacity(sequence.len());
        let mut out = Vec::with_capacity(sequence.len());
        let mut clock = case_start;
        for a in sequence {
            steps.push(Step { embedding: self.embeddings.get(a.as_ref())?, enablement: clock, processing: 0.0, waiting: 0.0 });
            let pred = self.network.forward(&window(&steps, self.ngram, width))?;
            let p_scaled = pred[0].max(0.0);
            let w_scaled = pred[1].max(0.0);
            let processing_secs = (p_scaled * TimeScaling::divisor(self.scaling.max_processing)).round() as i64;
            let waiting_secs = (w_scaled * TimeScaling::divisor(self.scaling.max_waiting)).round() as i64;
            let last = steps.last_mut().expect("just pushed");
            last.processing = self.scaling.processing(processing_secs as f64);
            last.waiting = self.scaling.waiting(waiting_secs as f64);
            clock += Duration::seconds(waiting_secs + processing_secs);
            out.push(PredictedStep { processing_secs, waiting_secs });
        }
        Ok(out)
    }

    /// Adds an embedding for a new activity; the network is untouched.
    pub fn extend<S: AsRef<str>>(
        &self,
        label: &str,
        examples: &[Vec<S>],
        seed: u64,
        config: &EmbeddingConfig,
    ) -> Result<TimeModel, TimingError> {
        Ok(TimeModel { embeddings: self.embeddings.extend(label, examples, seed, config)?, ..self.clone() })
    }

    pub fn save(&self, dir: &Path) -> Result<(), TimingError> {
        self.network.save(std::fs::File::create(dir.join(TIME_WEIGHTS))?)?;
        let doc = TimeDocument { embeddings: self.embeddings.clone(), scaling: self.scaling, ngram: self.ngram };
        std::fs::write(dir.join(TIME_JSON), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, TimingError> {
        let network = TrainedModel::load(std::fs::File::open(dir.join(TIME_WEIGHTS))?)?;
        let doc: TimeDocument = serde_json::from_str(&std::fs::read_to_string(dir.join(TIME_JSON))?)?;
        if network.spec().input_dim != SCALAR_FEATURES + doc.embeddings.dim || network.spec().output_dim != 2 {
            return Err(TimingError::Argument("time network does not match its embedding table".into()));
        }
        Ok(TimeModel { network, embeddings: doc.embeddings, scaling: doc.scaling, ngram: doc.ngram })
    }
}
