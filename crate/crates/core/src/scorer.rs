//! Per-vehicle scores and the fleet ranking.
//!
//! A state's score is the largest ratio among stored itemsets contained in the
//! state, or 0 when none is. Because the model holds every frequent itemset,
//! this equals the maximum over stored itemsets `X` of the ratio of `X ∩ state`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::miner::{IsrModel, ModelEntry};
use crate::model::{DefectState, Ratio, Status, TransactionLog};

pub const SNAPSHOT_HEADER: [&str; 2] = ["vehicle_id", "defect_state"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FleetSnapshot {
    pub as_of: Option<NaiveDate>,
    pub vehicles: BTreeMap<String, DefectState>,
}

impl FleetSnapshot {
    pub fn new(as_of: Option<NaiveDate>) -> Self {
        FleetSnapshot {
            as_of,
            vehicles: BTreeMap::new(),
        }
    }

    /// Every vehicle observed on `date`, rolled out or held back.
    pub fn from_log_day(log: &TransactionLog, date: NaiveDate) -> Self {
        FleetSnapshot {
            as_of: Some(date),
            vehicles: log
                .rows()
                .iter()
                .filter(|o| o.date == date)
                .map(|o| (o.vehicle_id.clone(), o.state.clone()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }
}

/// Number of vehicles the supervisor rolled out on `date`.
pub fn rollouts_on(log: &TransactionLog, date: NaiveDate) -> usize {
    log.rows()
        .iter()
        .filter(|o| o.date == date && o.status == Status::Available)
        .count()
}

/// Reads a `vehicle_id,defect_state` CSV; duplicate vehicles are rejected.
pub fn load_snapshot<R: Read>(source: R) -> Result<FleetSnapshot> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(SNAPSHOT_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", SNAPSHOT_HEADER.join(",")),
        });
    }
    let mut snap = FleetSnapshot::new(None);
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let state = DefectState::parse(&record[1]).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty vehicle_id".into(),
            });
        }
        if snap.vehicles.insert(id.clone(), state).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("vehicle {id} listed twice"),
            });
        }
    }
    Ok(snap)
}

pub fn write_snapshot<W: Write>(snapshot: &FleetSnapshot, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SNAPSHOT_HEADER)?;
    for (id, state) in &snapshot.vehicles {
        w.write_record([id.as_str(), &state.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

impl FromIterator<(String, DefectState)> for FleetSnapshot {
    fn from_iter<I: IntoIterator<Item = (String, DefectState)>>(iter: I) -> Self {
        FleetSnapshot {
            as_of: None,
            vehicles: iter.into_iter().collect(),
        }
    }
}

/// A score and the itemset that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub score: Ratio,
    pub witness: Option<DefectState>,
}

impl ScoreResult {
    pub fn zero() -> Self {
        ScoreResult {
            score: Ratio::ZERO,
            witness: None,
        }
    }
}

/// Witness preference among equal ratios: larger itemset, then lexicographically smaller.
pub(crate) fn better_witness(a: &DefectState, b: &DefectState) -> bool {
    match a.len().cmp(&b.len()) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a < b,
    }
}

pub fn score_state(model: &IsrModel, state: &DefectState) -> ScoreResult {
    let mut best: Option<(Ratio, &ModelEntry)> = None;
    for entry in model.subsets_of(state) {
        let ratio = model.ratio_of(entry);
        let replace = match &best {
            None => true,
            Some((r, e)) => match ratio.cmp(r) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => better_witness(&entry.itemset, &e.itemset),
            },
        };
        if replace {
            best = Some((ratio, entry));
        }
    }
    match best {
        Some((score, entry)) if !score.is_zero() => ScoreResult {
            score,
            witness: Some(entry.itemset.clone()),
        },
        _ => ScoreResult::zero(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedVehicle {
    pub vehicle_id: String,
    pub state: DefectState,
    pub result: ScoreResult,
}

/// Vehicles in ascending score order, most roll-out suitable first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub ordered: Vec<RankedVehicle>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    pub fn vehicle_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.ordered.iter().map(|v| v.vehicle_id.as_str())
    }
}

pub fn rank_fleet(model: &IsrModel, snapshot: &FleetSnapshot) -> Ranking {
    let mut ordered: Vec<RankedVehicle> = snapshot
        .vehicles
        .iter()
        .map(|(id, state)| RankedVehicle {
            vehicle_id: id.clone(),
            state: state.clone(),
            result: score_state(model, state),
        })
        .collect();
    ordered.sort_by(|a, b| {
        a.result
            .score
            .cmp(&b.result.score)
            .then_with(|| a.vehicle_id.cmp(&b.vehicle_id))
    });
    Ranking { ordered }
}

/// The first `n` vehicle ids; `n` beyond the fleet size returns everything.
pub fn select_top_n(ranking: &Ranking, n: usize) -> Vec<String> {
    ranking.vehicle_ids().take(n).map(str::to_owned).collect()
}

/// `rank,vehicle_id,score_numerator,score_denominator,score_display,witness_itemset`
pub fn write_ranking<W: Write>(ranking: &Ranking, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "rank",
        "vehicle_id",
        "score_numerator",
        "score_denominator",
        "score_display",
        "witness_itemset",
    ])?;
    for (i, v) in ranking.ordered.iter().enumerate() {
        let score = v.result.score;
        w.write_record([
            (i + 1).to_string(),
            v.vehicle_id.clone(),
            score.numerator().to_string(),
            score.denominator().to_string(),
            score.to_string(),
            v.result
                .witness
                .as_ref()
                .map(|s| s.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
