//! The subset-scan scorer, the intersection form and a direct scan over all
//! model keys agree exactly.

mod common;

use common::*;
use rand::Rng;
use rollaid::{
    build_isr, mine_frequent_itemsets, score_state, train, MinerConfig, ModelConfig,
    PreprocessConfig, Provenance, Smoothing,
};

fn random_model(r: &mut impl Rng, case: u64) -> rollaid::IsrModel {
    let k = 1 + case % 3;
    let smoothing = if case.is_multiple_of(5) {
        Smoothing::Laplace
    } else {
        Smoothing::None
    };
    if case.is_multiple_of(2) {
        let log = random_log(r, 12, 6);
        let miner = MinerConfig {
            min_support: k,
            max_itemset_size: None,
            smoothing,
        };
        train(&log, &PreprocessConfig::default(), &miner).unwrap()
    } else {
        let (n_beta, n_alpha) = (r.random_range(1..120), r.random_range(0..200));
        let beta = random_multiset(r, 12, n_beta, 6);
        let alpha = random_multiset(r, 12, n_alpha, 6);
        let cfg = MinerConfig::new(k).unwrap();
        let itemsets = mine_frequent_itemsets(&beta, &cfg).unwrap();
        let config = ModelConfig {
            delta: 0.85,
            min_support: k,
            max_itemset_size: None,
            smoothing,
        };
        build_isr(&itemsets, &alpha, config, Provenance::default()).unwrap()
    }
}

#[test]
fn three_formulations_agree() {
    for case in 0..500u64 {
        let mut r = rng(20_000 + case);
        let model = random_model(&mut r, case);
        let state = random_state(&mut r, 14, 9);
        let fast = score_state(&model, &state);
        let (brute, brute_witness) = brute_force_score(&model, &state);
        let inter = intersection_score(&model, &state);
        assert_eq!(fast.score, brute, "case {case}: {state}");
        assert_eq!(fast.score, inter, "case {case}: {state}");
        assert_eq!(fast.witness, brute_witness, "case {case}: {state}");
        if let Some(w) = &fast.witness {
            assert!(w.is_subset(&state));
            assert_eq!(model.isr(w), fast.score);
        } else {
            assert!(fast.score.is_zero());
        }
    }
}
