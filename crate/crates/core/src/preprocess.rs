//! Log ingestion and transition labeling.
//!
//! A defect state is *bad* when the supervisor marked it `Down` in at least a
//! `delta` fraction of all its appearances in the log. Adjacent same-vehicle
//! rows then yield two multisets of day-D states:
//!
//! * `alpha`: Available on day D and Available on the next observation
//!   (remains available);
//! * `beta`: Available on day D, Down on the next observation, and the next
//!   observation's state is a member of the bad set (becomes down).
//!
//! Adjacent rows form a transition regardless of the calendar gap between them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DefectState, Observation, Status, TransactionLog};

pub const LOG_HEADER: [&str; 4] = ["vehicle_id", "timestamp", "defect_state", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Minimum down-fraction for a state to count as bad.
    pub delta: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { delta: 0.85 }
    }
}

impl PreprocessConfig {
    pub fn new(delta: f64) -> Result<Self> {
        let cfg = PreprocessConfig { delta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta > 0.0 && self.delta <= 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )))
        }
    }
}

// ── Ingestion ───────────────────────────────────────────────────────────

#[derive(Debug, Deserialize)]
struct RawRow {
    vehicle_id: String,
    timestamp: String,
    defect_state: String,
    status: String,
}

/// Reads the `vehicle_id,timestamp,defect_state,status` CSV.
pub fn load_transactions<R: Read>(source: R) -> Result<TransactionLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != LOG_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                LOG_HEADER.join(","),
                headers
            ),
        });
    }

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw: RawRow = record.deserialize(Some(&headers))?;
        let parse_err = |message: String| Error::Parse { line, message };

        if raw.vehicle_id.is_empty() {
            return Err(parse_err("empty vehicle_id".into()));
        }
        let date = NaiveDate::parse_from_str(&raw.timestamp, "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad timestamp {:?}: {e}", raw.timestamp)))?;
        let state = DefectState::parse(&raw.defect_state).map_err(|e| parse_err(e.to_string()))?;
        let status = raw.status.parse::<Status>().map_err(parse_err)?;
        lines.push(((raw.vehicle_id.clone(), date), line));
        rows.push(Observation {
            vehicle_id: raw.vehicle_id,
            date,
            state,
            status,
        });
    }

    let mut seen = BTreeMap::new();
    for (key, line) in lines {
        if seen.insert(key.clone(), line).is_some() {
            return Err(Error::DuplicateObservation {
                vehicle_id: key.0,
                date: key.1,
                line,
            });
        }
    }
    TransactionLog::from_rows(rows)
}

/// Writes a log in the same CSV schema `load_transactions` reads.
pub fn write_transactions<W: Write>(log: &TransactionLog, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(LOG_HEADER)?;
    for r in log.rows() {
        w.write_record([
            r.vehicle_id.as_str(),
            &r.date.format("%Y-%m-%d").to_string(),
            &r.state.to_string(),
            r.status.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ── Bad states ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BadStateSet {
    states: BTreeSet<DefectState>,
}

impl BadStateSet {
    pub fn contains(&self, state: &DefectState) -> bool {
        self.states.contains(state)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DefectState> + '_ {
        self.states.iter()
    }
}

impl FromIterator<DefectState> for BadStateSet {
    fn from_iter<I: IntoIterator<Item = DefectState>>(iter: I) -> Self {
        BadStateSet {
            states: iter.into_iter().collect(),
        }
    }
}

/// Every distinct state whose Down count over all its appearances reaches `delta`.
pub fn compute_bad_states(log: &TransactionLog, cfg: &PreprocessConfig) -> BadStateSet {
    let mut counts: BTreeMap<&DefectState, (u64, u64)> = BTreeMap::new();
    for row in log.rows() {
        let entry = counts.entry(&row.state).or_default();
        entry.1 += 1;
        if row.status == Status::Down {
            entry.0 += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(_, (down, total))| *down as f64 / *total as f64 >= cfg.delta)
        .map(|(state, _)| state.clone())
        .collect()
}

// ── Labeling ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionLabel {
    RemainsAvailable,
    BecomesDown,
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionLabel::RemainsAvailable => "Remains available",
            TransitionLabel::BecomesDown => "Becomes down",
        })
    }
}

/// A day-D row of the labeled dataset; `state` is what the vehicle was rolled out with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTransition {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub state: DefectState,
    pub current_status: Status,
    pub next_status: Status,
    pub label: TransitionLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledTransition>,
    pub alpha: Vec<DefectState>,
    pub beta: Vec<DefectState>,
}

pub fn label_transitions(log: &TransactionLog, bad: &BadStateSet) -> LabeledDataset {
    let mut out = LabeledDataset::default();
    for pair in log.rows().windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        if cur.vehicle_id != next.vehicle_id || cur.status != Status::Available {
            continue;
        }
        let label = match next.status {
            Status::Available => TransitionLabel::RemainsAvailable,
            Status::Down if bad.contains(&next.state) => TransitionLabel::BecomesDown,
            Status::Down => continue,
        };
        match label {
            TransitionLabel::RemainsAvailable => out.alpha.push(cur.state.clone()),
            TransitionLabel::BecomesDown => out.beta.push(cur.state.clone()),
        }
        out.rows.push(LabeledTransition {
            vehicle_id: cur.vehicle_id.clone(),
            date: cur.date,
            state: cur.state.clone(),
            current_status: cur.status,
            next_status: next.status,
            label,
        });
    }
    out
}

/// Writes the labeled dataset as
/// `vehicle_id,timestamp,defect_state,current_status,next_status,label`.
pub fn write_labeled<W: Write>(data: &LabeledDataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "vehicle_id",
        "timestamp",
        "defect_state",
        "current_status",
        "next_status",
        "label",
    ])?;
    for r in &data.rows {
        w.write_record([
            r.vehicle_id.as_str(),
            &r.date.format("%Y-%m-%d").to_string(),
            &r.state.to_string(),
            r.current_status.as_str(),
            r.next_status.as_str(),
            &r.label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
