//! Cost replay against a direct re-implementation, plus its invariants.

mod common;

use std::cmp::Ordering;

use chrono::NaiveDate;
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rollaid::evaluator::{nearest_state, StateCost};
use rollaid::{
    build_state_cost_index, compare_policies, observed_rollout_cost, train, Aggregation, CostTable,
    DefectState, EvalConfig, IsrModel, MinerConfig, Observation, PreprocessConfig, StateCostIndex,
    Status, TransactionLog,
};

fn cost_table(r: &mut impl Rng, n_items: usize) -> CostTable {
    let mut t = CostTable::new();
    for i in 0..n_items {
        t.insert(defect(i), f64::from(r.random_range(1u32..200)))
            .unwrap();
    }
    t
}

fn naive_rollout_cost(
    log: &TransactionLog,
    t: &CostTable,
    row: &Observation,
    theta: usize,
    agg: Aggregation,
) -> (f64, bool) {
    let now = t.state_repair_cost(&row.state).unwrap();
    let later: Vec<f64> = log
        .vehicle_rows(&row.vehicle_id)
        .iter()
        .filter(|o| o.date > row.date)
        .take(theta)
        .map(|o| t.state_repair_cost(&o.state).unwrap() - now)
        .collect();
    if later.is_empty() {
        return (0.0, true);
    }
    let sum: f64 = later.iter().sum();
    match agg {
        Aggregation::Mean => (sum / later.len() as f64, false),
        Aggregation::Sum => (sum, false),
    }
}

fn naive_nearest(index: &StateCostIndex, state: &DefectState) -> (DefectState, StateCost) {
    let mut all: Vec<(&DefectState, StateCost)> = index.iter().collect();
    let sim = |s: &DefectState| {
        let inter = s.intersection(state).len() as u128;
        let union = s.union(state).len() as u128;
        if union == 0 {
            (1, 1)
        } else {
            (inter, union)
        }
    };
    all.sort_by(|a, b| {
        let (sa, sb) = (sim(a.0), sim(b.0));
        (sb.0 * sa.1)
            .cmp(&(sa.0 * sb.1))
            .then(b.1.samples.cmp(&a.1.samples))
            .then_with(|| a.0.cmp(b.0))
    });
    (all[0].0.clone(), all[0].1)
}

/// The replay written out directly: rank with the brute-force scorer, take N, price.
fn naive_compare(
    log: &TransactionLog,
    model: &IsrModel,
    t: &CostTable,
    theta: usize,
    start: NaiveDate,
) -> Vec<(NaiveDate, u64, f64, f64)> {
    let history = log.filter_dates(|d| d < start);
    let index =
        build_state_cost_index(&history, t, &EvalConfig::new(theta as u32).unwrap()).unwrap();
    let mut dates: Vec<NaiveDate> = log
        .rows()
        .iter()
        .map(|o| o.date)
        .filter(|d| *d >= start)
        .collect();
    dates.sort();
    dates.dedup();
    dates
        .into_iter()
        .map(|date| {
            let today: Vec<&Observation> = log.rows().iter().filter(|o| o.date == date).collect();
            let rolled: Vec<&&Observation> = today
                .iter()
                .filter(|o| o.status == Status::Available)
                .collect();
            let n = rolled.len();
            let sup: f64 = rolled
                .iter()
                .map(|o| naive_rollout_cost(log, t, o, theta, Aggregation::Mean).0)
                .sum();
            let mut ranked: Vec<(rollaid::Ratio, &str, &DefectState)> = today
                .iter()
                .map(|o| {
                    (
                        brute_force_score(model, &o.state).0,
                        o.vehicle_id.as_str(),
                        &o.state,
                    )
                })
                .collect();
            ranked.sort();
            let mut aid = 0.0;
            for (_, v, state) in ranked.into_iter().take(n) {
                aid += match rolled.iter().find(|o| o.vehicle_id == v) {
                    Some(o) => naive_rollout_cost(log, t, o, theta, Aggregation::Mean).0,
                    None => naive_nearest(&index, state).1.median,
                };
            }
            (date, n as u64, sup, aid)
        })
        .collect()
}

#[test]
fn replay_matches_direct_implementation() {
    let mut checked_days = 0;
    for seed in 0..60u64 {
        let mut r = rng(40_000 + seed);
        let log = random_log(&mut r, 10, 5);
        let table = cost_table(&mut r, 10);
        let (first, last) = log.date_range().unwrap();
        if first == last {
            continue;
        }
        let split = first + chrono::Days::new(((last - first).num_days() / 2) as u64);
        let train_log = log.filter_dates(|d| d <= split);
        let model = train(
            &train_log,
            &PreprocessConfig::default(),
            &MinerConfig::new(1).unwrap(),
        )
        .unwrap();
        let theta = 1 + (seed % 4) as u32;
        let start = split + chrono::Days::new(1);
        let cmp = match compare_policies(&log, &model, &table, &EvalConfig::new(theta).unwrap()) {
            Ok(c) => c,
            Err(rollaid::Error::EmptyHistory) => continue,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        let want = naive_compare(&log, &model, &table, theta as usize, start);
        assert_eq!(cmp.days.len(), want.len(), "seed {seed}");
        for (d, (date, n, sup, aid)) in cmp.days.iter().zip(want) {
            assert_eq!((d.date, d.n_rollouts), (date, n));
            assert!((d.supervisor_cost - sup).abs() < 1e-9, "seed {seed} {date}");
            assert!((d.supaid_cost - aid).abs() < 1e-9, "seed {seed} {date}");
            checked_days += 1;
        }
        // totals are exactly the sum of the day records
        assert_eq!(
            cmp.supervisor_total,
            cmp.days.iter().map(|d| d.supervisor_cost).sum::<f64>()
        );
        assert_eq!(
            cmp.supaid_total,
            cmp.days.iter().map(|d| d.supaid_cost).sum::<f64>()
        );
        assert_eq!(
            cmp.censored_supervisor,
            cmp.days.iter().map(|d| d.censored_supervisor).sum::<u64>()
        );
    }
    assert!(checked_days > 200, "only {checked_days} days compared");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observed_cost_matches_direct_scan(seed in any::<u64>(), theta in 1u32..6, sum in any::<bool>()) {
        let mut r = rng(seed);
        let log = random_log(&mut r, 8, 5);
        let table = cost_table(&mut r, 8);
        let agg = if sum { Aggregation::Sum } else { Aggregation::Mean };
        let cfg = EvalConfig { aggregation: agg, ..EvalConfig::new(theta).unwrap() };
        for row in log.rows() {
            let got = observed_rollout_cost(&log, &table, &row.vehicle_id, row.date, &cfg).unwrap();
            let (want, censored) = naive_rollout_cost(&log, &table, row, theta as usize, agg);
            prop_assert!((got.cost - want).abs() < 1e-9);
            prop_assert_eq!(got.censored(), censored);
        }
    }

    #[test]
    fn counterfactual_is_order_invariant(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut entries: Vec<(DefectState, StateCost)> = (0..r.random_range(1..25))
            .map(|_| {
                let state = random_state(&mut r, 8, 4);
                let cost = StateCost { median: f64::from(r.random_range(0u32..100)), samples: r.random_range(1..4) };
                (state, cost)
            })
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|a, b| a.0 == b.0);
        let index: StateCostIndex = entries.iter().cloned().collect();
        entries.shuffle(&mut rng(shuffle_seed));
        let shuffled: StateCostIndex = entries.into_iter().collect();
        for _ in 0..20 {
            let probe = random_state(&mut r, 10, 5);
            let (a, ca) = nearest_state(&index, &probe).unwrap();
            let (b, cb) = nearest_state(&shuffled, &probe).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(ca, cb);
            let (want, cw) = naive_nearest(&index, &probe);
            prop_assert_eq!(a, &want);
            prop_assert_eq!(ca, cw);
        }
    }

    #[test]
    fn identical_selections_cost_the_same(seed in any::<u64>(), theta in 1u32..5) {
        // every observed vehicle is rolled out, so the model must pick the same set
        let mut r = rng(seed);
        let rows: Vec<Observation> = random_log(&mut r, 8, 4)
            .rows()
            .iter()
            .cloned()
            .map(|o| Observation { status: Status::Available, ..o })
            .collect();
        let log = TransactionLog::from_rows(rows).unwrap();
        let table = cost_table(&mut r, 8);
        let model = train(&log, &PreprocessConfig::default(), &MinerConfig::new(1).unwrap()).unwrap();
        let (first, _) = log.date_range().unwrap();
        let cfg = EvalConfig { test_start: Some(first), ..EvalConfig::new(theta).unwrap() };
        let cmp = compare_policies(&log, &model, &table, &cfg).unwrap();
        for d in &cmp.days {
            prop_assert_eq!(d.supervisor_cost, d.supaid_cost);
            prop_assert_eq!(d.n_counterfactual, 0);
        }
        prop_assert_eq!(cmp.supervisor_total, cmp.supaid_total);
        prop_assert_eq!(Ordering::Equal, cmp.supervisor_total.total_cmp(&cmp.supaid_total));
    }
}
