//! Event logs: parsing, validation, temporal splitting and summary
//! statistics.
//!
//! A log is a set of traces; each trace is the ordered list of activity
//! instances executed for one case. Events are ordered by start time, then
//! end time, then activity label, so every downstream replay sees one total
//! order. All timestamps are normalised to UTC with one-second resolution.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, Datelike, NaiveDateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("end timestamp precedes start on rows {rows:?}")]
    Validation { rows: Vec<u64> },
    #[error("invalid log: {0}")]
    Invalid(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub activity: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub resource: Option<String>,
}

impl Event {
    pub fn new(activity: impl Into<String>, start: Timestamp, end: Timestamp) -> Self {
        Self { activity: activity.into(), start, end, resource: None }
    }

    pub fn processing_secs(&self) -> i64 {
        (self.end - self.start).num_seconds()
    }
}

fn event_order(a: &Event, b: &Event) -> std::cmp::Ordering {
    a.start.cmp(&b.start).then(a.end.cmp(&b.end)).then_with(|| a.activity.cmp(&b.activity))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    case_id: String,
    events: Vec<Event>,
}

impl Trace {
    /// Sorts the events and checks the per-event invariants.
    pub fn new(case_id: impl Into<String>, mut events: Vec<Event>) -> Result<Self, LogError> {
        let case_id = case_id.into();
        if events.is_empty() {
            return Err(LogError::Invalid(format!("trace {case_id} has no events")));
        }
        for e in &events {
            if e.activity.is_empty() {
                return Err(LogError::Invalid(format!("trace {case_id} has an unlabeled event")));
            }
            if e.end < e.start {
                return Err(LogError::Invalid(format!(
                    "trace {case_id}: {} ends before it starts",
                    e.activity
                )));
            }
        }
        events.sort_by(event_order);
        Ok(Self { case_id, events })
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> Vec<String> {
        self.events.iter().map(|e| e.activity.clone()).collect()
    }

    pub fn start(&self) -> Timestamp {
        self.events[0].start
    }

    pub fn end(&self) -> Timestamp {
        self.events.iter().map(|e| e.end).max().expect("non-empty trace")
    }

    /// Last end minus first start, in seconds.
    pub fn cycle_time_secs(&self) -> i64 {
        (self.end() - self.start()).num_seconds()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventLog {
    traces: Vec<Trace>,
    alphabet: BTreeSet<String>,
}

impl EventLog {
    pub fn new(traces: Vec<Trace>) -> Result<Self, LogError> {
        let mut seen = BTreeSet::new();
        for t in &traces {
            if !seen.insert(t.case_id.as_str()) {
                return Err(LogError::Invalid(format!("duplicate case id {}", t.case_id)));
            }
        }
        let alphabet = traces
            .iter()
            .flat_map(|t| t.events.iter().map(|e| e.activity.clone()))
            .collect();
        Ok(Self { traces, alphabet })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn into_traces(self) -> Vec<Trace> {
        self.traces
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn num_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn sequences(&self) -> Vec<Vec<String>> {
        self.traces.iter().map(Trace::activities).collect()
    }

    /// Builds a log from bare activity sequences: case `i` starts at
    /// 2020-01-06 00:00 UTC plus `i` hours and its events are back-to-back
    /// one-minute instances. Empty sequences are skipped.
    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>]) -> Self {
        let origin = chrono::TimeZone::with_ymd_and_hms(&Utc, 2020, 1, 6, 0, 0, 0).unwrap();
        let traces = sequences
            .iter()
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(i, seq)| {
                let case_start = origin + chrono::Duration::hours(i as i64);
                let events = seq
                    .iter()
                    .enumerate()
                    .map(|(j, a)| {
                        let start = case_start + chrono::Duration::minutes(j as i64);
                        Event::new(a.as_ref(), start, start + chrono::Duration::minutes(1))
                    })
                    .collect();
                Trace::new(format!("case-{}", i + 1), events).expect("well-formed sequence")
            })
            .collect();
        Self::new(traces).expect("unique case ids")
    }

    /// Traces ordered by first-event start (ties by case id).
    pub fn traces_by_start(&self) -> Vec<&Trace> {
        let mut sorted: Vec<&Trace> = self.traces.iter().collect();
        sorted.sort_by(|a, b| a.start().cmp(&b.start()).then_with(|| a.case_id.cmp(&b.case_id)));
        sorted
    }
}

/// Column mapping and timestamp pattern for CSV input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvFormat {
    pub case_column: String,
    pub activity_column: String,
    pub start_column: String,
    pub end_column: String,
    pub resource_column: Option<String>,
    /// chrono format string; `None` accepts RFC 3339 / ISO-8601 with offset.
    pub timestamp_format: Option<String>,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            case_column: "case_id".into(),
            activity_column: "activity".into(),
            start_column: "start_timestamp".into(),
            end_column: "end_timestamp".into(),
            resource_column: Some("resource".into()),
            timestamp_format: None,
        }
    }
}

fn parse_timestamp(raw: &str, format: Option<&str>) -> Result<Timestamp, String> {
    let raw = raw.trim();
    let parsed = match format {
        None => DateTime::parse_from_rfc3339(raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| format!("timestamp {raw:?}: {e}")),
        Some(fmt) => DateTime::parse_from_str(raw, fmt)
            .map(|t| t.with_timezone(&Utc))
            .or_else(|_| NaiveDateTime::parse_from_str(raw, fmt).map(|n| n.and_utc()))
            .map_err(|e| format!("timestamp {raw:?} does not match {fmt:?}: {e}")),
    }?;
    // sub-second precision is dropped
    Ok(parsed.with_nanosecond(0).expect("zero nanoseconds is valid"))
}

/// Parses a CSV event log. Rows are grouped into traces by case id, in order
/// of first appearance.
pub fn parse_log<R: Read>(source: R, format: &CsvFormat) -> Result<EventLog, LogError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LogError::Config(format!("missing column {name:?}")))
    };
    let case_idx = column(&format.case_column)?;
    let act_idx = column(&format.activity_column)?;
    let start_idx = column(&format.start_column)?;
    let end_idx = column(&format.end_column)?;
    // an absent optional resource column is not an error
    let res_idx = format
        .resource_column
        .as_deref()
        .and_then(|name| headers.iter().position(|h| h == name));

    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<Event>> = HashMap::new();
    let mut bad_rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let case_id = field(case_idx).to_string();
        let activity = field(act_idx).to_string();
        if case_id.is_empty() {
            return Err(LogError::Parse { row, message: "empty case id".into() });
        }
        if activity.is_empty() {
            return Err(LogError::Parse { row, message: "empty activity label".into() });
        }
        let tf = format.timestamp_format.as_deref();
        let start = parse_timestamp(field(start_idx), tf).map_err(|message| LogError::Parse { row, message })?;
        let end = parse_timestamp(field(end_idx), tf).map_err(|message| LogError::Parse { row, message })?;
        if end < start {
            bad_rows.push(row);
            continue;
        }
        let resource = res_idx.map(|i| field(i).to_string()).filter(|r| !r.is_empty());
        if !grouped.contains_key(&case_id) {
            order.push(case_id.clone());
        }
        grouped.entry(case_id).or_default().push(Event { activity, start, end, resource });
    }
    if !bad_rows.is_empty() {
        return Err(LogError::Validation { rows: bad_rows });
    }
    let traces = order
        .into_iter()
        .map(|id| {
            let events = grouped.remove(&id).unwrap_or_default();
            Trace::new(id, events)
        })
        .collect::<Result<Vec<_>, _>>()?;
    EventLog::new(traces)
}

pub fn read_log_file(path: &std::path::Path, format: &CsvFormat) -> Result<EventLog, LogError> {
    parse_log(std::fs::File::open(path)?, format)
}

pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, false)
}

/// Writes the log with the default column names.
pub fn write_log<W: Write>(log: &EventLog, sink: W) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["case_id", "activity", "start_timestamp", "end_timestamp", "resource"])?;
    for t in &log.traces {
        for e in &t.events {
            w.write_record([
                t.case_id.as_str(),
                e.activity.as_str(),
                &format_timestamp(&e.start),
                &format_timestamp(&e.end),
                e.resource.as_deref().unwrap_or(""),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn log_to_csv_string(log: &EventLog) -> String {
    let mut buf = Vec::new();
    write_log(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Splits by first-event start: the earliest `ceil(ratio * n)` traces train.
pub fn temporal_split(log: &EventLog, ratio: f64) -> Result<(EventLog, EventLog), LogError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(LogError::Argument(format!("split ratio {ratio} outside (0, 1)")));
    }
    if log.is_empty() {
        return Err(LogError::Argument("cannot split an empty log".into()));
    }
    let sorted = log.traces_by_start();
    let n_train = ((ratio * sorted.len() as f64).ceil() as usize).min(sorted.len());
    let train = sorted[..n_train].iter().map(|t| (*t).clone()).collect();
    let test = sorted[n_train..].iter().map(|t| (*t).clone()).collect();
    Ok((EventLog::new(train)?, EventLog::new(test)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogStats {
    pub num_traces: usize,
    pub num_events: usize,
    pub num_activities: usize,
    pub avg_activities_per_trace: Option<f64>,
    /// Seconds.
    pub avg_duration: Option<f64>,
    /// Seconds.
    pub max_duration: Option<f64>,
}

pub fn log_stats(log: &EventLog) -> LogStats {
    let n = log.len();
    let durations: Vec<f64> = log.traces.iter().map(|t| t.cycle_time_secs() as f64).collect();
    let (avg_per_trace, avg, max) = if n == 0 {
        (None, None, None)
    } else {
        (
            Some(log.num_events() as f64 / n as f64),
            Some(durations.iter().sum::<f64>() / n as f64),
            durations.iter().cloned().reduce(f64::max),
        )
    };
    LogStats {
        num_traces: n,
        num_events: log.num_events(),
        num_activities: log.alphabet.len(),
        avg_activities_per_trace: avg_per_trace,
        avg_duration: avg,
        max_duration: max,
    }
}

/// Monday = 0.
pub fn weekday_index(ts: &Timestamp) -> usize {
    ts.weekday().num_days_from_monday() as usize
}

/// Seconds elapsed since the preceding UTC midnight.
pub fn seconds_of_day(ts: &Timestamp) -> u32 {
    ts.num_seconds_from_midnight()
}

/// Bin in `0..168`: Monday 00h is 0, Sunday 23h is 167.
pub fn hour_of_week(ts: &Timestamp) -> usize {
    weekday_index(ts) * 24 + ts.hour() as usize
}
