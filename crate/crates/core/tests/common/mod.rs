#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};

use prosim::eventlog::{log_to_csv_string, EventLog};
use prosim::pipeline::{persist, run_pipeline_on, PipelineConfig};
use prosim::project::ProjectStore;
use prosim::search::SearchConfig;
use prosim::synthetic::{generate_ground_truth, GroundTruthConfig};
use prosim_neural::Activation;

/// Small budgets so end-to-end tests stay fast.
pub fn tiny_config() -> PipelineConfig {
    let mut c = PipelineConfig {
        seed: 3,
        runs: 2,
        search: SearchConfig { trials: 2, runs_per_trial: 1, ..Default::default() },
        ..Default::default()
    };
    c.time.units = vec![4];
    c.time.activations = vec![Activation::Tanh];
    c.time.ngrams = vec![3];
    c.time.train.epochs = 2;
    c.time.train.patience = 2;
    c.time.max_examples = Some(40);
    c.time.embedding.epochs = 20;
    c
}

pub const TINY_TOML: &str = r#"
seed = 3
runs = 2

[search]
trials = 2
runs_per_trial = 1

[time]
units = [4]
activations = ["tanh"]
ngrams = [3]
max_examples = 40

[time.train]
epochs = 2
patience = 2

[time.embedding]
epochs = 20
"#;

pub fn fixture_log(traces: usize) -> EventLog {
    generate_ground_truth(&GroundTruthConfig { traces, seed: 1, ..Default::default() }).unwrap()
}

pub fn write_csv(dir: &Path, name: &str, log: &EventLog) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, log_to_csv_string(log)).unwrap();
    path
}

/// A project directory holding a full pipeline run over the fixture log.
pub fn trained_project(dir: &Path) -> ProjectStore {
    let log = fixture_log(60);
    let config = tiny_config();
    let out = run_pipeline_on(&log, &config).unwrap();
    let store = ProjectStore::create(dir).unwrap();
    persist(&store, &log, &out, &config).unwrap();
    store
}

/// A seeded log over labels A..E: 1 to 8 traces of 1 to 6 events with
/// gaps and durations up to a few hours.
pub fn random_log(seed: u64) -> EventLog {
    use chrono::{Duration, TimeZone, Utc};
    use prosim::eventlog::{Event, Trace};
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let t0 = Utc.with_ymd_and_hms(2022, 1, 3, 0, 0, 0).unwrap();
    let traces = (0..rng.random_range(1..=8))
        .map(|i| {
            let mut clock = t0 + Duration::seconds(rng.random_range(0..7 * 86_400));
            let events = (0..rng.random_range(1..=6))
                .map(|_| {
                    let label = ["A", "B", "C", "D", "E"][rng.random_range(0..5)];
                    let start = clock + Duration::seconds(rng.random_range(0..7200));
                    let end = start + Duration::seconds(rng.random_range(0..7200));
                    clock = end;
                    Event::new(label, start, end)
                })
                .collect();
            Trace::new(format!("r{i}"), events).unwrap()
        })
        .collect();
    EventLog::new(traces).unwrap()
}
