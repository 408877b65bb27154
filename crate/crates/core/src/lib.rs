//! Roll-out decision aid for fleet supervisors.
//!
//! Historical supervisor decisions are turned into two multisets of defect
//! states: states a vehicle was rolled out with that stayed available, and
//! states rolled out that went down the next day into a state the supervisor
//! almost always holds back. Frequent defect combinations of the second
//! multiset are mined with FP-growth and weighted by how much more often they
//! precede a breakdown than continued service. A vehicle's score is the
//! largest such ratio among the combinations it carries; the fleet is ranked
//! ascending so the most roll-out-suitable vehicles come first.
//!
//! ```
//! use rollaid::{fixtures, load_transactions, rank_fleet, train, FleetSnapshot};
//! use rollaid::{DefectState, MinerConfig, PreprocessConfig};
//!
//! let log = load_transactions(fixtures::WORKED_LOG_CSV.as_bytes())?;
//! let model = train(&log, &PreprocessConfig::default(), &MinerConfig::new(1)?)?;
//!
//! let fleet: FleetSnapshot = [
//!     ("A".to_string(), DefectState::parse("d1;d2")?),
//!     ("B".to_string(), DefectState::parse("d6;d7;d8")?),
//!     ("C".to_string(), DefectState::parse("d5")?),
//! ]
//! .into_iter()
//! .collect();
//! let ranking = rank_fleet(&model, &fleet);
//! assert_eq!(ranking.vehicle_ids().collect::<Vec<_>>(), ["C", "A", "B"]);
//! # Ok::<(), rollaid::Error>(())
//! ```

pub mod datagen;
pub mod error;
pub mod evaluator;
pub mod fixtures;
pub mod miner;
pub mod model;
pub mod persist;
pub mod preprocess;
pub mod scorer;

pub use error::{Error, Result};
pub use evaluator::{
    build_state_cost_index, compare_policies, counterfactual_cost, load_costs,
    observed_rollout_cost, write_costs, Aggregation, CostTable, EvalConfig, PolicyComparison,
    StateCostIndex,
};
pub use miner::{
    build_isr, mine_frequent_itemsets, support, train, FrequentItemsets, IsrModel, MinerConfig,
    ModelConfig, ModelEntry, Provenance, Smoothing,
};
pub use model::{
    canonicalize_state, jaccard, DefectId, DefectState, Observation, Ratio, Status, TransactionLog,
};
pub use persist::{load_model, save_model, whatif, WhatIfRequest, WhatIfResult};
pub use preprocess::{
    compute_bad_states, label_transitions, load_transactions, write_transactions, BadStateSet,
    LabeledDataset, PreprocessConfig,
};
pub use scorer::{
    load_snapshot, rank_fleet, rollouts_on, score_state, select_top_n, write_ranking,
    write_snapshot, FleetSnapshot, Ranking, ScoreResult,
};
