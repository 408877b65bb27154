//! Synthetic fleets with planted failure-causing defect combinations and a
//! simulated supervisor who is never wrong when holding a vehicle back.
//!
//! Each vehicle is simulated day by day:
//!
//! 1. Morning repairs. A vehicle held yesterday was in the shop: contained
//!    planted combinations are fixed and every other defect is repaired with
//!    `shop_repair_rate`. Otherwise each open defect is repaired with
//!    `repair_rate`.
//! 2. The morning state is observed and the supervisor decides. A vehicle
//!    that failed yesterday is held, and so is one still in the shop (for
//!    `shop_days` days after a hold). A state containing a planted combination
//!    is held unless the supervisor errs, with probability
//!    `supervisor_error_rate`. Every `maintenance_interval` days each vehicle
//!    is held for preventive maintenance. Nothing else is ever held.
//! 3. A vehicle rolled out with a planted combination fails with that
//!    combination's probability, gaining `failure_damage` expensive failure
//!    defects, and is held the next day.
//! 4. A rolled-out vehicle picks up a defect on the trip with probability
//!    `defect_arrival_rate`, drawn from a planted combination with probability
//!    `planted_affinity`.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::CostTable;
use crate::model::{DefectId, DefectState, Observation, Status, TransactionLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedItemset {
    pub defects: DefectState,
    pub failure_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_vehicles: usize,
    /// Ordinary defects, named `d01`, `d02`, ...
    pub n_defects: usize,
    pub n_days: usize,
    /// Days from the start used for training by the CLI split; the rest is the test window.
    pub train_days: usize,
    pub start_date: NaiveDate,
    pub planted_bad_itemsets: Vec<PlantedItemset>,
    pub defect_arrival_rate: f64,
    pub planted_affinity: f64,
    pub repair_rate: f64,
    pub shop_repair_rate: f64,
    /// Daily repair probability of failure defects, in or out of the shop.
    pub damage_repair_rate: f64,
    pub shop_days: usize,
    /// Each vehicle is held for preventive maintenance every this many days (0 = never).
    pub maintenance_interval: usize,
    /// Failure defects, named `f01`, `f02`, ..., only ever caused by failures.
    pub n_failure_defects: usize,
    pub failure_damage: usize,
    pub supervisor_error_rate: f64,
    pub cost_range: (f64, f64),
    pub failure_cost_range: (f64, f64),
    pub seed: u64,
}

fn defect_name(i: usize) -> String {
    format!("d{i:02}")
}

fn failure_name(i: usize) -> String {
    format!("f{i:02}")
}

impl Default for GenConfig {
    fn default() -> Self {
        let planted = |ids: &[usize], failure_prob: f64| PlantedItemset {
            defects: ids
                .iter()
                .map(|&i| DefectId::new(defect_name(i)).expect("generated ids are valid"))
                .collect(),
            failure_prob,
        };
        GenConfig {
            n_vehicles: 50,
            n_defects: 40,
            n_days: 257,
            train_days: 200,
            start_date: NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date"),
            planted_bad_itemsets: vec![
                planted(&[1, 2], 0.9),
                planted(&[3, 4], 0.8),
                planted(&[5, 6, 7], 0.9),
            ],
            defect_arrival_rate: 0.35,
            planted_affinity: 0.5,
            repair_rate: 0.04,
            shop_repair_rate: 0.15,
            damage_repair_rate: 0.05,
            shop_days: 1,
            maintenance_interval: 60,
            n_failure_defects: 6,
            failure_damage: 2,
            supervisor_error_rate: 0.15,
            cost_range: (20.0, 120.0),
            failure_cost_range: (250.0, 500.0),
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("defect_arrival_rate", self.defect_arrival_rate)?;
        prob("planted_affinity", self.planted_affinity)?;
        prob("repair_rate", self.repair_rate)?;
        prob("shop_repair_rate", self.shop_repair_rate)?;
        prob("damage_repair_rate", self.damage_repair_rate)?;
        prob("supervisor_error_rate", self.supervisor_error_rate)?;
        for (name, v) in [
            ("n_vehicles", self.n_vehicles),
            ("n_defects", self.n_defects),
            ("n_days", self.n_days),
            ("shop_days", self.shop_days),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.train_days > self.n_days {
            return Err(Error::Config("train_days exceeds n_days".into()));
        }
        if self.failure_damage > 0 && self.n_failure_defects == 0 {
            return Err(Error::Config(
                "failure_damage needs at least one failure defect".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("cost_range", self.cost_range),
            ("failure_cost_range", self.failure_cost_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::Config(format!("{name} must satisfy 0 <= lo <= hi")));
            }
        }
        for p in &self.planted_bad_itemsets {
            prob("failure_prob", p.failure_prob)?;
            if p.defects.is_empty() {
                return Err(Error::Config("planted itemset is empty".into()));
            }
            if let Some(unknown) = p.defects.iter().find(|id| !self.is_ordinary(id)) {
                return Err(Error::Config(format!(
                    "planted itemset {} mentions unknown defect {unknown}",
                    p.defects
                )));
            }
        }
        Ok(())
    }

    fn is_ordinary(&self, id: &DefectId) -> bool {
        (1..=self.n_defects).any(|i| defect_name(i) == id.as_str())
    }

    pub fn train_end(&self) -> NaiveDate {
        self.start_date + Days::new(self.train_days.saturating_sub(1) as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldReason {
    /// State contains a planted combination.
    PlantedItemset,
    /// Vehicle failed on its previous rollout.
    Failed,
    /// Still being repaired after an earlier hold.
    InShop,
    /// Scheduled preventive maintenance.
    Maintenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldRecord {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub reason: HoldReason,
}

/// A rollout of a vehicle whose state contained a planted combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub state: DefectState,
    pub failed: bool,
}

pub const GROUND_TRUTH_FORMAT: &str = "rollaid-ground-truth";
pub const GROUND_TRUTH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub planted_bad_itemsets: Vec<PlantedItemset>,
    pub supervisor_errors: Vec<ErrorRecord>,
    pub holds: Vec<HoldRecord>,
    pub failures: u64,
}

pub fn write_ground_truth<W: Write>(gt: &GroundTruth, mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, gt)?;
    sink.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub log: TransactionLog,
    pub costs: CostTable,
    pub truth: GroundTruth,
}

fn ids(names: impl Iterator<Item = String>) -> Vec<DefectId> {
    names
        .map(|n| DefectId::new(n).expect("generated ids are valid"))
        .collect()
}

pub fn generate(cfg: &GenConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let ordinary = ids((1..=cfg.n_defects).map(defect_name));
    let failure = ids((1..=cfg.n_failure_defects).map(failure_name));

    let mut costs = CostTable::new();
    for (pool, (lo, hi)) in [
        (&ordinary, cfg.cost_range),
        (&failure, cfg.failure_cost_range),
    ] {
        for id in pool {
            let raw = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            costs.insert(id.clone(), (raw * 100.0).round() / 100.0)?;
        }
    }

    let planted_members: Vec<&DefectId> = cfg
        .planted_bad_itemsets
        .iter()
        .flat_map(|p| p.defects.iter())
        .collect();

    let mut rows = Vec::with_capacity(cfg.n_vehicles * cfg.n_days);
    let mut errors = Vec::new();
    let mut holds = Vec::new();
    let mut failures = 0u64;

    for v in 0..cfg.n_vehicles {
        let vehicle_id = format!("v{:03}", v + 1);
        let mut state = DefectState::empty();
        for _ in 0..rng.random_range(0..3) {
            state.insert(ordinary.choose(&mut rng).expect("n_defects > 0").clone());
        }
        let mut held_yesterday = false;
        let mut shop_left = 0usize;
        let mut failed = false;

        for day in 0..cfg.n_days {
            let date = cfg.start_date + Days::new(day as u64);

            let rate = if held_yesterday {
                fix_planted(&cfg.planted_bad_itemsets, &mut state);
                cfg.shop_repair_rate
            } else {
                cfg.repair_rate
            };
            repair_each(&mut state, &mut rng, |id| {
                if is_failure_defect(id) {
                    cfg.damage_repair_rate
                } else {
                    rate
                }
            });

            let contained = cfg
                .planted_bad_itemsets
                .iter()
                .filter(|p| p.defects.is_subset(&state))
                .map(|p| p.failure_prob)
                .reduce(f64::max);
            let maintenance_due =
                cfg.maintenance_interval > 0 && (day + v) % cfg.maintenance_interval == 0;
            let reason = if failed {
                Some(HoldReason::Failed)
            } else if shop_left > 0 {
                shop_left -= 1;
                Some(HoldReason::InShop)
            } else if contained.is_some() && !rng.random_bool(cfg.supervisor_error_rate) {
                Some(HoldReason::PlantedItemset)
            } else if maintenance_due {
                Some(HoldReason::Maintenance)
            } else {
                None
            };

            rows.push(Observation {
                vehicle_id: vehicle_id.clone(),
                date,
                state: state.clone(),
                status: if reason.is_some() {
                    Status::Down
                } else {
                    Status::Available
                },
            });
            failed = false;
            held_yesterday = reason.is_some();

            match reason {
                Some(reason) => {
                    if matches!(reason, HoldReason::PlantedItemset | HoldReason::Failed) {
                        shop_left = cfg.shop_days - 1;
                    }
                    holds.push(HoldRecord {
                        vehicle_id: vehicle_id.clone(),
                        date,
                        reason,
                    });
                }
                None => {
                    if let Some(p_fail) = contained {
                        let fails = rng.random_bool(p_fail);
                        errors.push(ErrorRecord {
                            vehicle_id: vehicle_id.clone(),
                            date,
                            state: state.clone(),
                            failed: fails,
                        });
                        if fails {
                            failures += 1;
                            failed = true;
                            for _ in 0..cfg.failure_damage {
                                state.insert(failure.choose(&mut rng).expect("checked").clone());
                            }
                        }
                    }
                    // wear picked up on the trip shows in tomorrow's state
                    if rng.random_bool(cfg.defect_arrival_rate) {
                        let pick = if !planted_members.is_empty()
                            && rng.random_bool(cfg.planted_affinity)
                        {
                            (*planted_members.choose(&mut rng).expect("non-empty")).clone()
                        } else {
                            ordinary.choose(&mut rng).expect("n_defects > 0").clone()
                        };
                        state.insert(pick);
                    }
                }
            }
        }
    }

    let truth = GroundTruth {
        format: GROUND_TRUTH_FORMAT.into(),
        version: GROUND_TRUTH_VERSION,
        seed: cfg.seed,
        planted_bad_itemsets: cfg.planted_bad_itemsets.clone(),
        supervisor_errors: errors,
        holds,
        failures,
    };
    Ok(Synthetic {
        log: TransactionLog::from_rows(rows)?,
        costs,
        truth,
    })
}

fn fix_planted(planted: &[PlantedItemset], state: &mut DefectState) {
    for p in planted {
        if p.defects.is_subset(state) {
            for id in &p.defects {
                state.remove(id);
            }
        }
    }
}

fn is_failure_defect(id: &DefectId) -> bool {
    id.as_str().starts_with('f')
}

fn repair_each(state: &mut DefectState, rng: &mut ChaCha8Rng, rate: impl Fn(&DefectId) -> f64) {
    let open: Vec<DefectId> = state.iter().cloned().collect();
    for id in open {
        if rng.random_bool(rate(&id)) {
            state.remove(&id);
        }
    }
}

/// Down rows of the log paired with the hold that explains each, or `None`
/// when some Down row has no recorded justification.
pub fn justify_holds<'a>(
    log: &'a TransactionLog,
    truth: &'a GroundTruth,
) -> Option<Vec<(&'a Observation, HoldReason)>> {
    let reasons: BTreeMap<(&str, NaiveDate), HoldReason> = truth
        .holds
        .iter()
        .map(|h| ((h.vehicle_id.as_str(), h.date), h.reason))
        .collect();
    log.rows()
        .iter()
        .filter(|r| r.status == Status::Down)
        .map(|r| {
            reasons
                .get(&(r.vehicle_id.as_str(), r.date))
                .map(|reason| (r, *reason))
        })
        .collect()
}
