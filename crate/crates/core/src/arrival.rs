//! Case inter-arrival modelling: a per-(weekday, hour) table of fitted
//! distributions, or a recurrent network fed back with its own predictions.

use std::path::Path;

use chrono::Duration;
use prosim_neural::{train, Activation, LayerSpec, NetworkSpec, NeuralError, Sample, TrainConfig, TrainedModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{fit_best, FitResult};
use crate::eventlog::{seconds_of_day, weekday_index, EventLog, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum ArrivalError {
    #[error("need at least {needed} inter-arrival samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("series of {len} cases is too short for window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("all inter-arrival times are zero; nothing to scale by")]
    ZeroScale,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub interarrival_secs: f64,
    pub time_of_day_secs: u32,
    /// Monday = 0.
    pub weekday: usize,
}

/// Case starts in ascending order with the gap to the previous case (0 for
/// the first) and the calendar position of the start itself.
pub fn extract_arrival_series(log: &EventLog) -> Vec<ArrivalRecord> {
    let mut starts: Vec<Timestamp> = log.traces().iter().map(|t| t.start()).collect();
    starts.sort();
    let mut prev = None;
    starts
        .into_iter()
        .map(|s| {
            let gap = prev.map_or(0.0, |p: Timestamp| (s - p).num_seconds() as f64);
            prev = Some(s);
            ArrivalRecord { interarrival_secs: gap, time_of_day_secs: seconds_of_day(&s), weekday: weekday_index(&s) }
        })
        .collect()
}

fn hour_cell(r: &ArrivalRecord) -> usize {
    r.weekday * 24 + (r.time_of_day_secs / 3600) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellFit {
    Fitted { fit: FitResult, samples: usize },
    /// Too few samples; the global fit applies.
    Fallback { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub weekday: usize,
    pub hour: usize,
    #[serde(flatten)]
    pub fit: CellFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedPdfTable {
    pub min_samples: usize,
    pub global: FitResult,
    /// 168 cells, Monday 00h first.
    pub cells: Vec<TableCell>,
}

impl WindowedPdfTable {
    /// The distribution governing the gap after a case started at `at`.
    pub fn resolve(&self, at: &Timestamp) -> &FitResult {
        let cell = weekday_index(at) * 24 + (seconds_of_day(at) / 3600) as usize;
        match &self.cells[cell].fit {
            CellFit::Fitted { fit, .. } => fit,
            CellFit::Fallback { .. } => &self.global,
        }
    }
}

pub const DEFAULT_MIN_SAMPLES: usize = 10;

/// Fits each gap in the cell of the case start it follows. Cells with fewer
/// than `min_samples` gaps fall back to the fit over all gaps.
pub fn fit_multimodal(series: &[ArrivalRecord], min_samples: usize) -> Result<WindowedPdfTable, ArrivalError> {
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); 168];
    for w in series.windows(2) {
        cells[hour_cell(&w[0])].push(w[1].interarrival_secs);
    }
    let all: Vec<f64> = cells.iter().flatten().copied().collect();
    if all.len() < min_samples.max(1) {
        return Err(ArrivalError::TooFewSamples { needed: min_samples.max(1), found: all.len() });
    }
    let global = fit_best(&all).ok_or(ArrivalError::TooFewSamples { needed: 1, found: 0 })?;
    let cells = cells
        .iter()
        .enumerate()
        .map(|(i, xs)| {
            let fit = match fit_best(xs) {
                Some(fit) if xs.len() >= min_samples => CellFit::Fitted { fit, samples: xs.len() },
                _ => CellFit::Fallback { samples: xs.len() },
            };
            TableCell { weekday: i / 24, hour: i % 24, fit }
        })
        .collect();
    Ok(WindowedPdfTable { min_samples, global, cells })
}

const MAX_RESAMPLES: usize = 100;

pub fn generate_from_table(table: &WindowedPdfTable, n: usize, start: Timestamp, seed: u64) -> Vec<Timestamp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut clock = start;
    for i in 0..n {
        if i > 0 {
            let dist = table.resolve(&clock).distribution;
            let mut gap = dist.sample(&mut rng);
            let mut tries = 1;
            while gap < 0.0 && tries < MAX_RESAMPLES {
                gap = dist.sample(&mut rng);
                tries += 1;
            }
            clock += Duration::seconds(gap.max(0.0).round() as i64);
        }
        out.push(clock);
    }
    out
}

pub const ARRIVAL_FEATURES: usize = 9;

fn features(scaled_gap: f64, at: &Timestamp) -> Vec<f64> {
    let mut v = vec![0.0; ARRIVAL_FEATURES];
    v[0] = scaled_gap;
    v[1] = seconds_of_day(at) as f64 / 86_400.0;
    v[2 + weekday_index(at)] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrivalNetConfig {
    pub window: usize,
    pub units: usize,
    pub train: TrainConfig,
    /// Share of the latest windows held out to drive early stopping.
    pub validation_ratio: f64,
}

impl Default for ArrivalNetConfig {
    fn default() -> Self {
        Self { window: 5, units: 100, train: TrainConfig { epochs: 100, ..Default::default() }, validation_ratio: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentArrival {
    pub network: TrainedModel,
    pub max_interarrival: f64,
    pub window: usize,
    /// Feature rows seeding generation: the last window of the training series.
    pub warmup: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalDataset {
    pub samples: Vec<Sample>,
    pub max_interarrival: f64,
}

fn record_row(r: &ArrivalRecord, max: f64) -> Vec<f64> {
    let mut v = vec![0.0; ARRIVAL_FEATURES];
    v[0] = r.interarrival_secs / max;
    v[1] = r.time_of_day_secs as f64 / 86_400.0;
    v[2 + r.weekday] = 1.0;
    v
}

/// Sliding windows of `window` feature rows, each predicting the next
/// scaled gap.
pub fn arrival_dataset(series: &[ArrivalRecord], window: usize) -> Result<ArrivalDataset, ArrivalError> {
    if window == 0 {
        return Err(ArrivalError::Argument("window must be at least 1".into()));
    }
    if series.len() <= window {
        return Err(ArrivalError::SeriesTooShort { len: series.len(), window });
    }
    let max = series.iter().map(|r| r.interarrival_secs.abs()).fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(ArrivalError::ZeroScale);
    }
    let rows: Vec<Vec<f64>> = series.iter().map(|r| record_row(r, max)).collect();
    let samples = (window..rows.len())
        .map(|i| Sample::new(rows[i - window..i].to_vec(), vec![rows[i][0]]))
        .collect();
    Ok(ArrivalDataset { samples, max_interarrival: max })
}

pub fn arrival_network_spec(units: usize) -> Result<NetworkSpec, NeuralError> {
    NetworkSpec::new(
        ARRIVAL_FEATURES,
        vec![
            LayerSpec::gru(units, Activation::Tanh),
            LayerSpec::gru(units, Activation::Tanh),
            LayerSpec::dense(1, Activation::Linear),
        ],
    )
}

/// Splits the latest `ratio` of samples off for validation, keeping at least
/// one training sample.
pub(crate) fn temporal_holdout<T: Clone>(samples: &[T], ratio: f64) -> (Vec<T>, Vec<T>) {
    let n_val = ((samples.len() as f64) * ratio).floor() as usize;
    let n_val = n_val.min(samples.len().saturating_sub(1));
    let cut = samples.len() - n_val;
    (samples[..cut].to_vec(), samples[cut..].to_vec())
}

pub fn train_arrival_net(series: &[ArrivalRecord], config: &ArrivalNetConfig) -> Result<RecurrentArrival, ArrivalError> {
    let data = arrival_dataset(series, config.window)?;
    let (train_set, validation) = temporal_holdout(&data.samples, config.validation_ratio);
    let model = TrainedModel::init(arrival_network_spec(config.units)?, config.train.seed)?;
    let network = train(model, &train_set, &validation, &config.train)?;
    let warmup = series[series.len() - config.window..].iter().map(|r| record_row(r, data.max_interarrival)).collect();
    Ok(RecurrentArrival { network, max_interarrival: data.max_interarrival, window: config.window, warmup })
}

impl RecurrentArrival {
    /// Deterministic rollout: each prediction, clamped at zero and rounded to
    /// whole seconds, becomes the next input row.
    pub fn generate(&self, n: usize, start: Timestamp) -> Result<Vec<Timestamp>, ArrivalError> {
        let mut window = self.warmup.clone();
        let mut out = Vec::with_capacity(n);
        let mut clock = start;
        for i in 0..n {
            if i > 0 {
                let scaled = self.network.forward(&window)?[0].max(0.0);
                let gap = (scaled * self.max_interarrival).round();
                clock += Duration::seconds(gap as i64);
                window.remove(0);
                window.push(features(gap / self.max_interarrival, &clock));
            }
            out.push(clock);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalVariant {
    #[default]
    Multimodal,
    Recurrent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalModel {
    Multimodal(WindowedPdfTable),
    Recurrent(RecurrentArrival),
}

#[derive(Serialize, Deserialize)]
struct ArrivalDocument {
    variant: ArrivalVariant,
    table: Option<WindowedPdfTable>,
    max_interarrival: Option<f64>,
    window: Option<usize>,
    warmup: Option<Vec<Vec<f64>>>,
}

pub const ARRIVAL_JSON: &str = "arrival.json";
pub const ARRIVAL_WEIGHTS: &str = "arrival.weights";

impl ArrivalModel {
    pub fn variant(&self) -> ArrivalVariant {
        match self {
            ArrivalModel::Multimodal(_) => ArrivalVariant::Multimodal,
            ArrivalModel::Recurrent(_) => ArrivalVariant::Recurrent,
        }
    }

    /// `n` non-decreasing case starts beginning at `start`. The seed only
    /// affects the table variant.
    pub fn generate(&self, n: usize, start: Timestamp, seed: u64) -> Result<Vec<Timestamp>, ArrivalError> {
        match self {
            ArrivalModel::Multimodal(t) => Ok(generate_from_table(t, n, start, seed)),
            ArrivalModel::Recurrent(r) => r.generate(n, start),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), ArrivalError> {
        let doc = match self {
            ArrivalModel::Multimodal(t) => ArrivalDocument {
                variant: ArrivalVariant::Multimodal,
                table: Some(t.clone()),
                max_interarrival: None,
                window: None,
                warmup: None,
            },
            ArrivalModel::Recurrent(r) => {
                r.network.save(std::fs::File::create(dir.join(ARRIVAL_WEIGHTS))?)?;
                ArrivalDocument {
                    variant: ArrivalVariant::Recurrent,
                    table: None,
                    max_interarrival: Some(r.max_interarrival),
                    window: Some(r.window),
                    warmup: Some(r.warmup.clone()),
                }
            }
        };
        std::fs::write(dir.join(ARRIVAL_JSON), serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ArrivalError> {
        let doc: ArrivalDocument = serde_json::from_str(&std::fs::read_to_string(dir.join(ARRIVAL_JSON))?)?;
        let missing = |what: &str| ArrivalError::Argument(format!("arrival model is missing {what}"));
        match doc.variant {
            ArrivalVariant::Multimodal => Ok(ArrivalModel::Multimodal(doc.table.ok_or_else(|| missing("table"))?)),
            ArrivalVariant::Recurrent => {
                let network = TrainedModel::load(std::fs::File::open(dir.join(ARRIVAL_WEIGHTS))?)?;
                let max_interarrival = doc.max_interarrival.ok_or_else(|| missing("scaling"))?;
                if max_interarrival <= 0.0 {
                    return Err(ArrivalError::ZeroScale);
                }
                Ok(ArrivalModel::Recurrent(RecurrentArrival {
                    network,
                    max_interarrival,
                    window: doc.window.ok_or_else(|| missing("window"))?,
                    warmup: doc.warmup.ok_or_else(|| missing("warm-up window"))?,
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Distribution, Family};
    use crate::eventlog::{Event, Trace};
    use chrono::{TimeZone, Utc};

    fn log_with_starts(starts: &[Timestamp]) -> EventLog {
        let traces = starts
            .iter()
            .enumerate()
            .map(|(i, &s)| Trace::new(format!("c{i}"), vec![Event::new("A", s, s + Duration::seconds(10))]).unwrap())
            .collect();
        EventLog::new(traces).unwrap()
    }

    #[test]
    fn series_matches_hand_values_and_ignores_input_order() {
        // 2021-03-01 is a Monday
        let a = Utc.with_ymd_and_hms(2021, 3, 1, 9, 10, 0).unwrap();
        let b = Utc.with_ymd_and_hms(2021, 3, 1, 9, 0, 0).unwrap();
        let s = extract_arrival_series(&log_with_starts(&[a, b]));
        assert_eq!(s[0], ArrivalRecord { interarrival_secs: 0.0, time_of_day_secs: 32_400, weekday: 0 });
        assert_eq!(s[1], ArrivalRecord { interarrival_secs: 600.0, time_of_day_secs: 33_000, weekday: 0 });
        assert_eq!(extract_arrival_series(&log_with_starts(&[b, a])), s);
        assert_eq!(extract_arrival_series(&log_with_starts(&[a])).len(), 1);
    }

    fn series_from_gaps(gaps: &[f64]) -> Vec<ArrivalRecord> {
        let mut t = Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap();
        let mut out = vec![ArrivalRecord { interarrival_secs: 0.0, time_of_day_secs: 0, weekday: 0 }];
        for &g in gaps {
            t += Duration::seconds(g as i64);
            out.push(ArrivalRecord { interarrival_secs: g, time_of_day_secs: seconds_of_day(&t), weekday: weekday_index(&t) });
        }
        out
    }

    #[test]
    fn sparse_cells_fall_back_and_totals_are_checked() {
        let series = series_from_gaps(&[60.0, 120.0, 90.0]);
        assert!(matches!(fit_multimodal(&series, 10), Err(ArrivalError::TooFewSamples { needed: 10, found: 3 })));
        let table = fit_multimodal(&series, 2).unwrap();
        assert!(matches!(table.cells[0].fit, CellFit::Fitted { samples: 3, .. }));
        assert!(matches!(table.cells[1].fit, CellFit::Fallback { samples: 0 }));
    }

    #[test]
    fn single_exponential_cell_generates_its_mean() {
        let fit = FitResult { distribution: Distribution::Exponential { rate: 1.0 / 600.0 }, fit_error: 0.0 };
        let table = WindowedPdfTable {
            min_samples: 10,
            global: fit,
            cells: (0..168).map(|i| TableCell { weekday: i / 24, hour: i % 24, fit: CellFit::Fallback { samples: 0 } }).collect(),
        };
        let start = Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap();
        let ts = generate_from_table(&table, 10_000, start, 3);
        assert_eq!(ts[0], start);
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
        let mean = (ts[9_999] - ts[0]).num_seconds() as f64 / 9_999.0;
        assert!((mean - 600.0).abs() < 30.0, "{mean}");
        assert_eq!(ts, generate_from_table(&table, 10_000, start, 3));
        assert_eq!(generate_from_table(&table, 1, start, 3), vec![start]);
    }

    #[test]
    fn exponential_gaps_are_recovered() {
        use rand_distr::Distribution as _;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let exp = rand_distr::Exp::new(1.0 / 600.0).unwrap();
        let gaps: Vec<f64> = (0..500).map(|_| { let x: f64 = exp.sample(&mut rng); x.round() }).collect();
        let table = fit_multimodal(&series_from_gaps(&gaps), 10).unwrap();
        assert_eq!(table.global.distribution.family(), Family::Exponential);
        assert!((table.global.distribution.mean() - 600.0).abs() < 60.0);
    }

    #[test]
    fn dataset_features_are_bounded() {
        let series = series_from_gaps(&[600.0; 12]);
        let data = arrival_dataset(&series, 5).unwrap();
        assert_eq!(data.samples.len(), 8);
        for s in &data.samples {
            assert_eq!(s.window.len(), 5);
            assert!(s.window.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
            assert!(s.window.iter().all(|r| r.len() == 9));
        }
        assert!(matches!(arrival_dataset(&series[..5], 5), Err(ArrivalError::SeriesTooShort { .. })));
    }
}
