//! Brute-force oracles and seeded generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rollaid::{
    DefectId, DefectState, IsrModel, ModelEntry, Observation, Ratio, Status, TransactionLog,
};

pub fn st(s: &str) -> DefectState {
    DefectState::parse(s).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn defect(i: usize) -> DefectId {
    DefectId::new(format!("d{i:02}")).unwrap()
}

/// A random state over the first `n_items` defects with at most `max_len` members.
pub fn random_state(rng: &mut impl Rng, n_items: usize, max_len: usize) -> DefectState {
    let len = rng.random_range(0..=max_len.min(n_items));
    (0..len)
        .map(|_| defect(rng.random_range(0..n_items)))
        .collect()
}

pub fn random_multiset(
    rng: &mut impl Rng,
    n_items: usize,
    n_tx: usize,
    max_len: usize,
) -> Vec<DefectState> {
    (0..n_tx)
        .map(|_| random_state(rng, n_items, max_len))
        .collect()
}

/// A log whose states come from a small pool, each with its own down
/// propensity, so that bad states and both transition kinds occur.
pub fn random_log(rng: &mut impl Rng, n_items: usize, max_len: usize) -> TransactionLog {
    let pool: Vec<(DefectState, f64)> = (0..rng.random_range(2..10))
        .map(|_| {
            let p = if rng.random_bool(0.4) { 0.95 } else { 0.1 };
            (random_state(rng, n_items, max_len), p)
        })
        .collect();
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut rows = Vec::new();
    for v in 0..rng.random_range(1..6) {
        let mut day = 0u64;
        for _ in 0..rng.random_range(1..60) {
            day += rng.random_range(1..3);
            let (state, p_down) = &pool[rng.random_range(0..pool.len())];
            rows.push(Observation {
                vehicle_id: format!("v{v}"),
                date: start + Days::new(day),
                state: state.clone(),
                status: if rng.random_bool(*p_down) {
                    Status::Down
                } else {
                    Status::Available
                },
            });
        }
    }
    TransactionLog::from_rows(rows).unwrap()
}

// ── Oracles ─────────────────────────────────────────────────────────────

fn subsets(state: &DefectState) -> Vec<DefectState> {
    let items: Vec<&DefectId> = state.iter().collect();
    (1u32..(1 << items.len()))
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, id)| (*id).clone())
                .collect()
        })
        .collect()
}

/// Every non-empty subset of every transaction, counted and filtered.
pub fn brute_force_frequent(
    transactions: &[DefectState],
    min_support: u64,
    max_len: Option<usize>,
) -> BTreeMap<DefectState, u64> {
    let mut counts: BTreeMap<DefectState, u64> = BTreeMap::new();
    for t in transactions {
        for s in subsets(t) {
            *counts.entry(s).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(s, c)| *c >= min_support && max_len.is_none_or(|m| s.len() <= m))
        .collect()
}

pub fn naive_support(itemset: &DefectState, transactions: &[DefectState]) -> u64 {
    transactions.iter().filter(|t| itemset.is_subset(t)).count() as u64
}

fn prefer(a: &ModelEntry, b: &ModelEntry) -> bool {
    a.itemset.len() > b.itemset.len()
        || (a.itemset.len() == b.itemset.len() && a.itemset < b.itemset)
}

/// Maximum ratio over all model keys contained in `state`, scanning every key.
pub fn brute_force_score(model: &IsrModel, state: &DefectState) -> (Ratio, Option<DefectState>) {
    let mut best: Option<(Ratio, &ModelEntry)> = None;
    for e in model.entries() {
        if !e.itemset.is_subset(state) {
            continue;
        }
        let r = model.ratio_of(e);
        best = match best {
            Some((br, be)) if br > r || (br == r && !prefer(e, be)) => Some((br, be)),
            _ => Some((r, e)),
        };
    }
    match best {
        Some((r, e)) if !r.is_zero() => (r, Some(e.itemset.clone())),
        _ => (Ratio::ZERO, None),
    }
}

/// The intersection form: max over model keys X of ratio(X ∩ state), where
/// itemsets absent from the model (including the empty set) count as 0.
pub fn intersection_score(model: &IsrModel, state: &DefectState) -> Ratio {
    model
        .entries()
        .iter()
        .map(|e| model.isr(&e.itemset.intersection(state)))
        .max()
        .unwrap_or(Ratio::ZERO)
}
