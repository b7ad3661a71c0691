//! Assembling simulated logs and comparing them with a reference log.

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::assignment::hungarian;
use crate::eventlog::{hour_of_week, Event, EventLog, LogError, Timestamp, Trace};
use crate::simulation::{cfls, SimulationError};
use crate::timing::{TimeModel, TimingError};

pub const HOUR_OF_WEEK_BINS: usize = 168;

#[derive(Debug, thiserror::Error)]
pub enum EvaluationError {
    #[error("{sequences} sequences but {arrivals} arrival times")]
    SizeMismatch { sequences: usize, arrivals: usize },
    #[error("cannot evaluate an empty log")]
    EmptyLog,
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
}

/// Pairs sequence `i` with arrival `i`. Each step starts after its predicted
/// waiting time, counted from the previous end (the case start for the first
/// step), and lasts its predicted processing time.
pub fn assemble_log<S: AsRef<str>>(
    sequences: &[Vec<S>],
    arrivals: &[Timestamp],
    time_model: &TimeModel,
) -> Result<EventLog, EvaluationError> {
    if sequences.len() != arrivals.len() {
        return Err(EvaluationError::SizeMismatch { sequences: sequences.len(), arrivals: arrivals.len() });
    }
    let width = sequences.len().to_string().len();
    let mut traces = Vec::with_capacity(sequences.len());
    for (i, (seq, &case_start)) in sequences.iter().zip(arrivals).enumerate() {
        if seq.is_empty() {
            continue;
        }
        let times = time_model.predict_times(seq, case_start)?;
        let mut clock = case_start;
        let events = seq
            .iter()
            .zip(&times)
            .map(|(a, t)| {
                let start = clock + Duration::seconds(t.waiting_secs);
                clock = start + Duration::seconds(t.processing_secs);
                Event::new(a.as_ref(), start, clock)
            })
            .collect();
        traces.push(Trace::new(format!("sim-{:0width$}", i + 1), events)?);
    }
    Ok(EventLog::new(traces)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTimeMae {
    pub mae_secs: f64,
    /// Traces duplicated on the smaller side to equalise the counts.
    pub padded: usize,
}

fn padded_cycle_times(log: &EventLog, size: usize) -> Vec<f64> {
    let traces = log.traces_by_start();
    let mut out: Vec<f64> = traces.iter().map(|t| t.cycle_time_secs() as f64).collect();
    let last = *out.last().expect("non-empty");
    out.resize(size, last);
    out
}

/// Mean absolute cycle-time error under the optimal one-to-one pairing of
/// traces. The smaller log is padded by repeating its latest-starting trace.
pub fn cycle_time_mae(generated: &EventLog, reference: &EventLog) -> Result<CycleTimeMae, EvaluationError> {
    if generated.is_empty() || reference.is_empty() {
        return Err(EvaluationError::EmptyLog);
    }
    let size = generated.len().max(reference.len());
    let g = padded_cycle_times(generated, size);
    let r = padded_cycle_times(reference, size);
    let cost: Vec<Vec<f64>> = g.iter().map(|a| r.iter().map(|b| (a - b).abs()).collect()).collect();
    let (_, total) = hungarian(&cost);
    Ok(CycleTimeMae { mae_secs: total / size as f64, padded: 2 * size - generated.len() - reference.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampSelection {
    #[default]
    StartAndEnd,
    StartOnly,
}

/// Normalised counts per UTC hour-of-week bin; all zeros for an empty log.
pub fn hour_of_week_histogram(log: &EventLog, selection: TimestampSelection) -> Vec<f64> {
    let mut bins = vec![0.0; HOUR_OF_WEEK_BINS];
    for e in log.traces().iter().flat_map(Trace::events) {
        bins[hour_of_week(&e.start)] += 1.0;
        if selection == TimestampSelection::StartAndEnd {
            bins[hour_of_week(&e.end)] += 1.0;
        }
    }
    let total: f64 = bins.iter().sum();
    if total > 0.0 {
        bins.iter_mut().for_each(|b| *b /= total);
    }
    bins
}

/// Sum of absolute CDF differences over the linearised bins, divided by
/// the largest possible transport distance.
pub fn emd_histograms(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "histograms differ in length");
    if a.len() < 2 {
        return 0.0;
    }
    let (mut ca, mut cb, mut sum) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        sum += f64::abs(ca - cb);
    }
    sum / (a.len() - 1) as f64
}

pub fn emd_timestamps(generated: &EventLog, reference: &EventLog) -> f64 {
    emd_with(generated, reference, TimestampSelection::default())
}

pub fn emd_with(generated: &EventLog, reference: &EventLog, selection: TimestampSelection) -> f64 {
    emd_histograms(&hour_of_week_histogram(generated, selection), &hour_of_week_histogram(reference, selection))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae_s: f64,
    pub emd: f64,
    pub cfls: f64,
}

pub fn evaluate_logs(generated: &EventLog, reference: &EventLog) -> Result<Metrics, EvaluationError> {
    Ok(Metrics {
        mae_s: cycle_time_mae(generated, reference)?.mae_secs,
        emd: emd_timestamps(generated, reference),
        cfls: cfls(&generated.sequences(), &reference.sequences())?,
    })
}
