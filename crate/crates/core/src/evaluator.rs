//! Cost replay of supervisor decisions against model-driven selections.
//!
//! The cost of rolling a vehicle out on day D is the mean, over its next
//! `theta` observations, of `repair_cost(later state) - repair_cost(state on D)`.
//! Vehicles the model would roll out but the supervisor held back have no
//! observed outcome; they are priced with the median historical rollout cost
//! of the most Jaccard-similar state ever rolled out.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::miner::IsrModel;
use crate::model::{jaccard_counts, DefectId, DefectState, Status, TransactionLog};
use crate::scorer::{rank_fleet, select_top_n, FleetSnapshot};

// ── Repair costs ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    costs: BTreeMap<DefectId, f64>,
}

impl CostTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: DefectId, cost: f64) -> Result<()> {
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::Config(format!(
                "repair cost of {id} must be finite and non-negative, got {cost}"
            )));
        }
        self.costs.insert(id, cost);
        Ok(())
    }

    pub fn get(&self, id: &DefectId) -> Option<f64> {
        self.costs.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DefectId, f64)> + '_ {
        self.costs.iter().map(|(k, v)| (k, *v))
    }

    /// Fails on the first defect in the log without a price.
    pub fn check_covers(&self, log: &TransactionLog) -> Result<()> {
        for row in log.rows() {
            self.state_repair_cost(&row.state)?;
        }
        Ok(())
    }

    /// Additive repair cost of a state; the empty state costs nothing.
    pub fn state_repair_cost(&self, state: &DefectState) -> Result<f64> {
        state
            .iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| Error::UnpricedDefect(id.to_string()))
            })
            .sum()
    }
}

/// Reads `defect_id,repair_cost`.
pub fn load_costs<R: Read>(source: R) -> Result<CostTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["defect_id", "repair_cost"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header \"defect_id,repair_cost\", found {headers:?}"),
        });
    }
    let mut table = CostTable::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        let id =
            DefectId::new(record.get(0).unwrap_or_default()).map_err(|e| err(e.to_string()))?;
        let cost: f64 = record
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e| err(format!("bad repair_cost: {e}")))?;
        if table.get(&id).is_some() {
            return Err(err(format!("duplicate defect {id}")));
        }
        table.insert(id, cost).map_err(|e| err(e.to_string()))?;
    }
    Ok(table)
}

pub fn write_costs<W: Write>(table: &CostTable, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["defect_id", "repair_cost"])?;
    for (id, cost) in table.iter() {
        w.write_record([id.as_str(), &format!("{cost:.2}")])?;
    }
    w.flush()?;
    Ok(())
}

// ── Configuration ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of the day-wise deltas against the rollout-day cost.
    #[default]
    Mean,
    /// Sum of the same deltas.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub theta: u32,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// First evaluated day; defaults to the day after the model's training window.
    #[serde(default)]
    pub test_start: Option<NaiveDate>,
    #[serde(default)]
    pub test_end: Option<NaiveDate>,
}

impl EvalConfig {
    pub fn new(theta: u32) -> Result<Self> {
        let cfg = EvalConfig {
            theta,
            aggregation: Aggregation::Mean,
            test_start: None,
            test_end: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta == 0 {
            return Err(Error::Config("theta must be at least 1".into()));
        }
        Ok(())
    }
}

// ── Observed rollout costs ──────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutCost {
    pub cost: f64,
    /// Later observations that went into the cost (at most theta).
    pub horizon: usize,
}

impl RolloutCost {
    /// No later observation exists; the cost is 0.
    pub fn censored(&self) -> bool {
        self.horizon == 0
    }
}

fn rollout_cost_at(
    log: &TransactionLog,
    table: &CostTable,
    index: usize,
    cfg: &EvalConfig,
) -> Result<RolloutCost> {
    let rows = log.rows();
    let current = &rows[index];
    let base = table.state_repair_cost(&current.state)?;
    let mut total = 0.0;
    let mut horizon = 0;
    for later in rows[index + 1..]
        .iter()
        .take_while(|r| r.vehicle_id == current.vehicle_id)
        .take(cfg.theta as usize)
    {
        total += table.state_repair_cost(&later.state)? - base;
        horizon += 1;
    }
    let cost = match (horizon, cfg.aggregation) {
        (0, _) => 0.0,
        (_, Aggregation::Mean) => total / horizon as f64,
        (_, Aggregation::Sum) => total,
    };
    Ok(RolloutCost { cost, horizon })
}

/// Cost of the rollout of `vehicle_id` on `date`, using its next `theta` observations.
pub fn observed_rollout_cost(
    log: &TransactionLog,
    table: &CostTable,
    vehicle_id: &str,
    date: NaiveDate,
    cfg: &EvalConfig,
) -> Result<RolloutCost> {
    let index = log
        .position(vehicle_id, date)
        .ok_or_else(|| Error::MissingObservation {
            vehicle_id: vehicle_id.to_owned(),
            date,
        })?;
    rollout_cost_at(log, table, index, cfg)
}

// ── Historical state costs ──────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateCost {
    pub median: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateCostIndex {
    entries: BTreeMap<DefectState, StateCost>,
}

impl StateCostIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, state: &DefectState) -> Option<StateCost> {
        self.entries.get(state).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DefectState, StateCost)> + '_ {
        self.entries.iter().map(|(k, v)| (k, *v))
    }
}

impl FromIterator<(DefectState, StateCost)> for StateCostIndex {
    fn from_iter<I: IntoIterator<Item = (DefectState, StateCost)>>(iter: I) -> Self {
        StateCostIndex {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Lower median, so the value is always one of the samples.
pub fn lower_median(samples: &mut [f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    samples.sort_by(f64::total_cmp);
    Some(samples[(samples.len() - 1) / 2])
}

/// Median rollout cost of every state rolled out (Available with a later observation) in `log`.
pub fn build_state_cost_index(
    log: &TransactionLog,
    table: &CostTable,
    cfg: &EvalConfig,
) -> Result<StateCostIndex> {
    let rows = log.rows();
    let mut samples: BTreeMap<&DefectState, Vec<f64>> = BTreeMap::new();
    for (i, pair) in rows.windows(2).enumerate() {
        if pair[0].status != Status::Available || pair[0].vehicle_id != pair[1].vehicle_id {
            continue;
        }
        let c = rollout_cost_at(log, table, i, cfg)?;
        samples.entry(&pair[0].state).or_default().push(c.cost);
    }
    Ok(samples
        .into_iter()
        .filter_map(|(state, mut s)| {
            let n = s.len() as u64;
            lower_median(&mut s).map(|median| (state.clone(), StateCost { median, samples: n }))
        })
        .collect())
}

/// The Jaccard-nearest historical state: highest similarity, then more
/// samples, then the lexicographically smallest state.
pub fn nearest_state<'a>(
    index: &'a StateCostIndex,
    state: &DefectState,
) -> Result<(&'a DefectState, StateCost)> {
    if let Some((k, v)) = index.entries.get_key_value(state) {
        // similarity 1 is unique to the identical state
        return Ok((k, *v));
    }
    let mut best: Option<((usize, usize), &DefectState, StateCost)> = None;
    for (candidate, cost) in index.iter() {
        let sim = jaccard_counts(state, candidate);
        let better = match &best {
            None => true,
            Some((best_sim, best_state, best_cost)) => {
                let by_sim =
                    (sim.0 as u128 * best_sim.1 as u128).cmp(&(best_sim.0 as u128 * sim.1 as u128));
                by_sim
                    .then(cost.samples.cmp(&best_cost.samples))
                    .then_with(|| best_state.cmp(&candidate))
                    == Ordering::Greater
            }
        };
        if better {
            best = Some((sim, candidate, cost));
        }
    }
    best.map(|(_, s, c)| (s, c)).ok_or(Error::EmptyHistory)
}

pub fn counterfactual_cost(index: &StateCostIndex, state: &DefectState) -> Result<f64> {
    nearest_state(index, state).map(|(_, c)| c.median)
}

// ── Policy comparison ───────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub n_rollouts: u64,
    pub supervisor_cost: f64,
    pub supaid_cost: f64,
    /// Vehicles chosen by both policies.
    pub n_shared: u64,
    /// Model selections priced from history.
    pub n_counterfactual: u64,
    pub censored_supervisor: u64,
    pub censored_supaid: u64,
}

impl DayRecord {
    /// Supervisor cost minus model cost; positive means the model saved money.
    pub fn delta(&self) -> f64 {
        self.supervisor_cost - self.supaid_cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub theta: u32,
    pub aggregation: Aggregation,
    pub days: Vec<DayRecord>,
    pub supervisor_total: f64,
    pub supaid_total: f64,
    pub censored_supervisor: u64,
    pub censored_supaid: u64,
    pub history_states: u64,
}

impl PolicyComparison {
    /// Relative saving of the model over the supervisor, in percent.
    pub fn savings_pct(&self) -> f64 {
        if self.supervisor_total == 0.0 {
            0.0
        } else {
            100.0 * (self.supervisor_total - self.supaid_total) / self.supervisor_total.abs()
        }
    }

    pub fn supervisor_per_day(&self) -> f64 {
        per_day(self.supervisor_total, self.days.len())
    }

    pub fn supaid_per_day(&self) -> f64 {
        per_day(self.supaid_total, self.days.len())
    }
}

fn per_day(total: f64, days: usize) -> f64 {
    if days == 0 {
        0.0
    } else {
        total / days as f64
    }
}

/// Replays each evaluation day: the supervisor's rollouts against the model's
/// top-N of all vehicles observed that day, N being the supervisor's count.
pub fn compare_policies(
    log: &TransactionLog,
    model: &IsrModel,
    table: &CostTable,
    cfg: &EvalConfig,
) -> Result<PolicyComparison> {
    cfg.validate()?;
    let start = cfg.test_start.or_else(|| {
        model
            .provenance
            .training_end
            .and_then(|d| d.checked_add_days(Days::new(1)))
    });
    let in_window =
        |d: NaiveDate| start.is_none_or(|s| d >= s) && cfg.test_end.is_none_or(|e| d <= e);

    let history = match start {
        Some(s) => log.filter_dates(|d| d < s),
        None => TransactionLog::default(),
    };
    let index = build_state_cost_index(&history, table, cfg)?;

    let mut by_day: BTreeMap<NaiveDate, Vec<usize>> = BTreeMap::new();
    for (i, row) in log.rows().iter().enumerate() {
        if in_window(row.date) {
            by_day.entry(row.date).or_default().push(i);
        }
    }

    let rows = log.rows();
    let mut days = Vec::with_capacity(by_day.len());
    for (date, indices) in by_day {
        let rolled: BTreeSet<&str> = indices
            .iter()
            .filter(|&&i| rows[i].status == Status::Available)
            .map(|&i| rows[i].vehicle_id.as_str())
            .collect();
        let n = rolled.len();
        let mut rec = DayRecord {
            date,
            n_rollouts: n as u64,
            supervisor_cost: 0.0,
            supaid_cost: 0.0,
            n_shared: 0,
            n_counterfactual: 0,
            censored_supervisor: 0,
            censored_supaid: 0,
        };
        if n > 0 {
            let mut observed: BTreeMap<&str, RolloutCost> = BTreeMap::new();
            for &i in &indices {
                if rows[i].status == Status::Available {
                    let c = rollout_cost_at(log, table, i, cfg)?;
                    rec.supervisor_cost += c.cost;
                    rec.censored_supervisor += u64::from(c.censored());
                    observed.insert(rows[i].vehicle_id.as_str(), c);
                }
            }

            let snapshot = FleetSnapshot {
                as_of: Some(date),
                vehicles: indices
                    .iter()
                    .map(|&i| (rows[i].vehicle_id.clone(), rows[i].state.clone()))
                    .collect(),
            };
            let ranking = rank_fleet(model, &snapshot);
            for vehicle in select_top_n(&ranking, n) {
                match observed.get(vehicle.as_str()) {
                    Some(c) => {
                        rec.supaid_cost += c.cost;
                        rec.n_shared += 1;
                        rec.censored_supaid += u64::from(c.censored());
                    }
                    None => {
                        rec.supaid_cost +=
                            counterfactual_cost(&index, &snapshot.vehicles[&vehicle])?;
                        rec.n_counterfactual += 1;
                    }
                }
            }
        }
        days.push(rec);
    }

    let supervisor_total = days.iter().map(|d| d.supervisor_cost).sum();
    let supaid_total = days.iter().map(|d| d.supaid_cost).sum();
    Ok(PolicyComparison {
        theta: cfg.theta,
        aggregation: cfg.aggregation,
        supervisor_total,
        supaid_total,
        censored_supervisor: days.iter().map(|d| d.censored_supervisor).sum(),
        censored_supaid: days.iter().map(|d| d.censored_supaid).sum(),
        history_states: index.len() as u64,
        days,
    })
}

// ── Reports ─────────────────────────────────────────────────────────────

/// `date,n_rollouts,supervisor_cost,supaid_cost,delta`
pub fn write_report<W: Write>(cmp: &PolicyComparison, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "date",
        "n_rollouts",
        "supervisor_cost",
        "supaid_cost",
        "delta",
    ])?;
    for d in &cmp.days {
        w.write_record([
            d.date.to_string(),
            d.n_rollouts.to_string(),
            format!("{:.4}", d.supervisor_cost),
            format!("{:.4}", d.supaid_cost),
            format!("{:.4}", d.delta()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-day delta series (supervisor minus model) for plotting.
pub fn write_delta_series<W: Write>(cmp: &PolicyComparison, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["date", "theta", "delta"])?;
    for d in &cmp.days {
        w.write_record([
            d.date.to_string(),
            cmp.theta.to_string(),
            format!("{:.4}", d.delta()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One summary row per theta: totals, per-day means and censoring counts.
pub fn write_summary<W: Write>(comparisons: &[PolicyComparison], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "theta",
        "days",
        "supervisor_total",
        "supaid_total",
        "savings_pct",
        "supervisor_per_day",
        "supaid_per_day",
        "censored_supervisor",
        "censored_supaid",
    ])?;
    for c in comparisons {
        w.write_record([
            c.theta.to_string(),
            c.days.len().to_string(),
            format!("{:.4}", c.supervisor_total),
            format!("{:.4}", c.supaid_total),
            format!("{:.4}", c.savings_pct()),
            format!("{:.4}", c.supervisor_per_day()),
            format!("{:.4}", c.supaid_per_day()),
            c.censored_supervisor.to_string(),
            c.censored_supaid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Observation;

    fn st(s: &str) -> DefectState {
        DefectState::parse(s).unwrap()
    }

    fn table(entries: &[(&str, f64)]) -> CostTable {
        let mut t = CostTable::new();
        for (k, v) in entries {
            t.insert(DefectId::new(*k).unwrap(), *v).unwrap();
        }
        t
    }

    fn day(n: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2017, 1, 1).unwrap() + Days::new(n)
    }

    fn vehicle_log(states: &[&str]) -> TransactionLog {
        TransactionLog::from_rows(
            states
                .iter()
                .enumerate()
                .map(|(i, s)| Observation {
                    vehicle_id: "v".into(),
                    date: day(i as u64),
                    state: st(s),
                    status: Status::Available,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn additive_state_cost() {
        let t = table(&[("d1", 10.0), ("d2", 30.0)]);
        assert_eq!(t.state_repair_cost(&st("d1;d2")).unwrap(), 40.0);
        assert_eq!(t.state_repair_cost(&st("")).unwrap(), 0.0);
        let err = t.state_repair_cost(&st("d1;d9")).unwrap_err();
        assert_eq!(err.to_string(), "unpriced defect d9");
    }

    #[test]
    fn observed_cost_examples() {
        let t = table(&[
            ("d1", 10.0),
            ("d2", 10.0),
            ("d3", 10.0),
            ("d4", 10.0),
            ("d5", 20.0),
        ]);
        // $40 -> $50 the next day
        let log = vehicle_log(&["d1;d2;d3;d4", "d1;d2;d3;d5"]);
        let c = observed_rollout_cost(&log, &t, "v", day(0), &EvalConfig::new(1).unwrap()).unwrap();
        assert_eq!(c.cost, 10.0);

        let log = vehicle_log(&["d1", "d1", "d1", "d1"]);
        let c = observed_rollout_cost(&log, &t, "v", day(0), &EvalConfig::new(3).unwrap()).unwrap();
        assert_eq!(c.cost, 0.0);
        assert_eq!(c.horizon, 3);

        // deltas +10 then +30
        let log = vehicle_log(&["d1", "d1;d2", "d1;d2;d3;d4"]);
        let c = observed_rollout_cost(&log, &t, "v", day(0), &EvalConfig::new(2).unwrap()).unwrap();
        assert_eq!(c.cost, 20.0);
        let sum_cfg = EvalConfig {
            aggregation: Aggregation::Sum,
            ..EvalConfig::new(2).unwrap()
        };
        let c = observed_rollout_cost(&log, &t, "v", day(0), &sum_cfg).unwrap();
        assert_eq!(c.cost, 40.0);
    }

    #[test]
    fn partial_and_censored_windows() {
        let t = table(&[("d1", 10.0), ("d2", 30.0)]);
        let log = vehicle_log(&["d1", "d1;d2"]);
        let c = observed_rollout_cost(&log, &t, "v", day(0), &EvalConfig::new(4).unwrap()).unwrap();
        assert_eq!((c.cost, c.horizon), (30.0, 1));
        let c = observed_rollout_cost(&log, &t, "v", day(1), &EvalConfig::new(4).unwrap()).unwrap();
        assert!(c.censored());
        assert_eq!(c.cost, 0.0);
        assert!(matches!(
            observed_rollout_cost(&log, &t, "v", day(9), &EvalConfig::new(4).unwrap()),
            Err(Error::MissingObservation { .. })
        ));
    }

    #[test]
    fn medians() {
        assert_eq!(lower_median(&mut [30.0, 10.0, 20.0]), Some(20.0));
        assert_eq!(lower_median(&mut [7.0]), Some(7.0));
        assert_eq!(lower_median(&mut [20.0, 10.0]), Some(10.0));
        assert_eq!(lower_median(&mut []), None);
    }

    #[test]
    fn index_collects_rolled_states() {
        let t = table(&[("d1", 10.0), ("d2", 30.0)]);
        let log = vehicle_log(&["d1", "d1;d2", "d1", "d1;d2"]);
        let index = build_state_cost_index(&log, &t, &EvalConfig::new(1).unwrap()).unwrap();
        // d1 rolled twice (+30, +30), d1;d2 once (-30); last row has no successor
        assert_eq!(
            index.get(&st("d1")),
            Some(StateCost {
                median: 30.0,
                samples: 2
            })
        );
        assert_eq!(
            index.get(&st("d1;d2")),
            Some(StateCost {
                median: -30.0,
                samples: 1
            })
        );
        assert_eq!(index.len(), 2);
    }

    #[test]
    fn counterfactual_examples() {
        let sc = |m: f64, n: u64| StateCost {
            median: m,
            samples: n,
        };
        let index: StateCostIndex = [(st("d1;d2;d3"), sc(12.0, 1)), (st("d4"), sc(99.0, 1))]
            .into_iter()
            .collect();
        assert_eq!(counterfactual_cost(&index, &st("d1;d2")).unwrap(), 12.0);
        assert_eq!(counterfactual_cost(&index, &st("d4")).unwrap(), 99.0);

        // both at similarity 1/2; more samples wins
        let index: StateCostIndex = [(st("a;b"), sc(1.0, 2)), (st("a;c"), sc(5.0, 5))]
            .into_iter()
            .collect();
        assert_eq!(counterfactual_cost(&index, &st("a")).unwrap(), 5.0);

        assert!(matches!(
            counterfactual_cost(&StateCostIndex::default(), &st("a")),
            Err(Error::EmptyHistory)
        ));
    }

    #[test]
    fn costs_csv_round_trip() {
        let t = table(&[("d1", 10.5), ("d2", 30.0)]);
        let mut buf = Vec::new();
        write_costs(&t, &mut buf).unwrap();
        assert_eq!(load_costs(buf.as_slice()).unwrap(), t);
        assert!(load_costs("defect_id,repair_cost\nd1,-3\n".as_bytes()).is_err());
        assert!(load_costs("defect_id,repair_cost\nd1,abc\n".as_bytes()).is_err());
        assert!(load_costs("defect_id,repair_cost\nd1,1\nd1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn theta_zero_rejected() {
        assert!(EvalConfig::new(0).is_err());
    }
}
