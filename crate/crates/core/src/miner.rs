//! Training: frequent itemsets of the becomes-down multiset and their
//! item-set ratios.
//!
//! Itemsets are mined from `beta` with FP-growth. Every frequent itemset is
//! kept (no closed/maximal compression), so the result is downward closed and
//! the scorer can look up any subset of a stored itemset. The ratio of an
//! itemset is its support in `beta` over its support in `alpha`.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{DefectId, DefectState, Ratio, TransactionLog};
use crate::preprocess::{
    compute_bad_states, label_transitions, write_transactions, PreprocessConfig,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// `support_beta / support_alpha`, with `n/0` kept as an infinite ratio.
    #[default]
    None,
    /// `(support_beta + 1) / (support_alpha + 1)`, for sensitivity runs.
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub min_support: u64,
    #[serde(default)]
    pub max_itemset_size: Option<usize>,
    #[serde(default)]
    pub smoothing: Smoothing,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            min_support: 1,
            max_itemset_size: None,
            smoothing: Smoothing::None,
        }
    }
}

impl MinerConfig {
    pub fn new(min_support: u64) -> Result<Self> {
        let cfg = MinerConfig {
            min_support,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_support == 0 {
            return Err(Error::Config("min_support must be at least 1".into()));
        }
        if self.max_itemset_size == Some(0) {
            return Err(Error::Config("max_itemset_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of multiset members (with multiplicity) that contain `iset`.
pub fn support(iset: &DefectState, transactions: &[DefectState]) -> u64 {
    transactions.iter().filter(|t| iset.is_subset(t)).count() as u64
}

/// Mined itemsets and their supports.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequentItemsets {
    entries: BTreeMap<DefectState, u64>,
}

impl FrequentItemsets {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, itemset: &DefectState) -> Option<u64> {
        self.entries.get(itemset).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DefectState, u64)> + '_ {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn into_map(self) -> BTreeMap<DefectState, u64> {
        self.entries
    }
}

impl FromIterator<(DefectState, u64)> for FrequentItemsets {
    fn from_iter<I: IntoIterator<Item = (DefectState, u64)>>(iter: I) -> Self {
        FrequentItemsets {
            entries: iter.into_iter().collect(),
        }
    }
}

// ── FP-growth ───────────────────────────────────────────────────────────

// Items are renamed to their rank in descending global frequency, so a sorted
// Vec<u32> is already in FP-tree insertion order.
type Item = u32;

const ROOT: usize = 0;

struct FpNode {
    item: Item,
    count: u64,
    parent: usize,
    children: Vec<(Item, usize)>,
}

struct FpTree {
    nodes: Vec<FpNode>,
    header: BTreeMap<Item, Vec<usize>>,
}

impl FpTree {
    fn new() -> Self {
        FpTree {
            nodes: vec![FpNode {
                item: Item::MAX,
                count: 0,
                parent: ROOT,
                children: Vec::new(),
            }],
            header: BTreeMap::new(),
        }
    }

    fn insert(&mut self, path: &[Item], count: u64) {
        let mut cur = ROOT;
        for &item in path {
            let found = self.nodes[cur]
                .children
                .iter()
                .find(|(i, _)| *i == item)
                .map(|&(_, idx)| idx);
            cur = match found {
                Some(idx) => idx,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(FpNode {
                        item,
                        count: 0,
                        parent: cur,
                        children: Vec::new(),
                    });
                    self.nodes[cur].children.push((item, idx));
                    self.header.entry(item).or_default().push(idx);
                    idx
                }
            };
            self.nodes[cur].count += count;
        }
    }

    /// Weighted prefix paths ending just above each node of `item`.
    fn prefix_paths(&self, item: Item) -> Vec<(Vec<Item>, u64)> {
        let mut out = Vec::new();
        for &idx in &self.header[&item] {
            let count = self.nodes[idx].count;
            let mut path = Vec::new();
            let mut cur = self.nodes[idx].parent;
            while cur != ROOT {
                path.push(self.nodes[cur].item);
                cur = self.nodes[cur].parent;
            }
            if !path.is_empty() {
                path.reverse();
                out.push((path, count));
            }
        }
        out
    }

    fn item_support(&self, item: Item) -> u64 {
        self.header[&item]
            .iter()
            .map(|&i| self.nodes[i].count)
            .sum()
    }
}

/// Builds a tree from weighted transactions, keeping only items with support >= `min_support`.
fn build_tree(transactions: &[(Vec<Item>, u64)], min_support: u64) -> FpTree {
    let mut counts: HashMap<Item, u64> = HashMap::new();
    for (t, w) in transactions {
        for &i in t {
            *counts.entry(i).or_default() += w;
        }
    }
    let mut tree = FpTree::new();
    let mut path = Vec::new();
    for (t, w) in transactions {
        path.clear();
        path.extend(t.iter().copied().filter(|i| counts[i] >= min_support));
        if !path.is_empty() {
            tree.insert(&path, *w);
        }
    }
    tree
}

struct Growth<'a> {
    min_support: u64,
    max_len: usize,
    out: &'a mut Vec<(Vec<Item>, u64)>,
}

impl Growth<'_> {
    fn grow(&mut self, tree: &FpTree, suffix: &mut Vec<Item>) {
        // least frequent first; order does not affect the result set
        let items: Vec<Item> = tree.header.keys().rev().copied().collect();
        for item in items {
            let sup = tree.item_support(item);
            if sup < self.min_support {
                continue;
            }
            suffix.push(item);
            self.out.push((suffix.clone(), sup));
            if suffix.len() < self.max_len {
                let base = tree.prefix_paths(item);
                if !base.is_empty() {
                    let cond = build_tree(&base, self.min_support);
                    if !cond.header.is_empty() {
                        self.grow(&cond, suffix);
                    }
                }
            }
            suffix.pop();
        }
    }
}

/// All non-empty itemsets with support at least `min_support` in `transactions`.
pub fn mine_frequent_itemsets(
    transactions: &[DefectState],
    cfg: &MinerConfig,
) -> Result<FrequentItemsets> {
    cfg.validate()?;

    let mut item_counts: BTreeMap<&DefectId, u64> = BTreeMap::new();
    for t in transactions {
        for id in t {
            *item_counts.entry(id).or_default() += 1;
        }
    }
    let mut frequent: Vec<(&DefectId, u64)> = item_counts
        .into_iter()
        .filter(|(_, c)| *c >= cfg.min_support)
        .collect();
    // descending count, ties by id, so the tree shape is input-order independent
    frequent.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let rank: HashMap<&DefectId, Item> = frequent
        .iter()
        .enumerate()
        .map(|(r, (id, _))| (*id, r as Item))
        .collect();

    let mut weighted: BTreeMap<Vec<Item>, u64> = BTreeMap::new();
    for t in transactions {
        let mut path: Vec<Item> = t.iter().filter_map(|id| rank.get(id).copied()).collect();
        if path.is_empty() {
            continue;
        }
        path.sort_unstable();
        *weighted.entry(path).or_default() += 1;
    }
    let weighted: Vec<(Vec<Item>, u64)> = weighted.into_iter().collect();

    let tree = build_tree(&weighted, cfg.min_support);
    let mut raw = Vec::new();
    Growth {
        min_support: cfg.min_support,
        max_len: cfg.max_itemset_size.unwrap_or(usize::MAX),
        out: &mut raw,
    }
    .grow(&tree, &mut Vec::new());

    Ok(raw
        .into_iter()
        .map(|(items, sup)| {
            let state = items
                .into_iter()
                .map(|r| frequent[r as usize].0.clone())
                .collect();
            (state, sup)
        })
        .collect())
}

// ── Item-set ratio model ────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub itemset: DefectState,
    pub beta_support: u64,
    pub alpha_support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub delta: f64,
    pub min_support: u64,
    pub max_itemset_size: Option<usize>,
    pub smoothing: Smoothing,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub training_start: Option<NaiveDate>,
    pub training_end: Option<NaiveDate>,
    pub n_rows: u64,
    pub n_vehicles: u64,
    pub n_alpha: u64,
    pub n_beta: u64,
    pub n_bad_states: u64,
    /// SHA-256 of the training log in canonical CSV form.
    pub log_digest: String,
}

/// The item-set ratio dictionary plus the configuration and data it came from.
#[derive(Debug, Clone)]
pub struct IsrModel {
    entries: Vec<ModelEntry>,
    by_first_item: HashMap<DefectId, Vec<usize>>,
    pub config: ModelConfig,
    pub provenance: Provenance,
}

impl PartialEq for IsrModel {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
            && self.config == other.config
            && self.provenance == other.provenance
    }
}

impl IsrModel {
    pub fn from_entries(
        mut entries: Vec<ModelEntry>,
        config: ModelConfig,
        provenance: Provenance,
    ) -> Result<Self> {
        entries.sort_by(|a, b| a.itemset.cmp(&b.itemset));
        if let Some(w) = entries.windows(2).find(|w| w[0].itemset == w[1].itemset) {
            return Err(Error::CorruptedModel {
                itemset: w[0].itemset.to_string(),
                reason: "duplicate itemset".into(),
            });
        }
        let mut by_first_item: HashMap<DefectId, Vec<usize>> = HashMap::new();
        for (idx, e) in entries.iter().enumerate() {
            let first = e
                .itemset
                .iter()
                .next()
                .ok_or_else(|| Error::CorruptedModel {
                    itemset: String::new(),
                    reason: "empty itemset".into(),
                })?;
            if e.beta_support == 0 && e.alpha_support == 0 {
                return Err(Error::CorruptedModel {
                    itemset: e.itemset.to_string(),
                    reason: "support is zero in both multisets".into(),
                });
            }
            by_first_item.entry(first.clone()).or_default().push(idx);
        }
        Ok(IsrModel {
            entries,
            by_first_item,
            config,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lexicographic itemset order.
    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    pub fn entry(&self, itemset: &DefectState) -> Option<&ModelEntry> {
        self.entries
            .binary_search_by(|e| e.itemset.cmp(itemset))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn ratio_of(&self, entry: &ModelEntry) -> Ratio {
        let (num, den) = match self.config.smoothing {
            Smoothing::None => (entry.beta_support, entry.alpha_support),
            Smoothing::Laplace => (entry.beta_support + 1, entry.alpha_support + 1),
        };
        // from_entries rejects 0/0
        Ratio::new(num, den).unwrap_or(Ratio::ZERO)
    }

    /// The stored ratio of an itemset; anything not stored (including the empty set) is 0.
    pub fn isr(&self, itemset: &DefectState) -> Ratio {
        self.entry(itemset)
            .map(|e| self.ratio_of(e))
            .unwrap_or(Ratio::ZERO)
    }

    /// Entries whose itemset is a subset of `state`.
    pub fn subsets_of<'a>(
        &'a self,
        state: &'a DefectState,
    ) -> impl Iterator<Item = &'a ModelEntry> + 'a {
        state
            .iter()
            .filter_map(|id| self.by_first_item.get(id))
            .flatten()
            .map(|&i| &self.entries[i])
            .filter(move |e| e.itemset.is_subset(state))
    }

    pub fn frequent_itemsets(&self) -> FrequentItemsets {
        self.entries
            .iter()
            .map(|e| (e.itemset.clone(), e.beta_support))
            .collect()
    }

    /// Every defect mentioned by some stored itemset.
    pub fn known_defects(&self) -> impl Iterator<Item = &DefectId> + '_ {
        self.by_first_item.keys()
    }

    pub fn mentions(&self, id: &DefectId) -> bool {
        self.entries.iter().any(|e| e.itemset.contains(id))
    }
}

/// Supports of many itemsets against one multiset via per-item occurrence lists.
fn supports_in(itemsets: &[&DefectState], transactions: &[DefectState]) -> Vec<u64> {
    let mut distinct: BTreeMap<&DefectState, u64> = BTreeMap::new();
    for t in transactions {
        *distinct.entry(t).or_default() += 1;
    }
    let distinct: Vec<(&DefectState, u64)> = distinct.into_iter().collect();
    let mut occurrences: HashMap<&DefectId, Vec<usize>> = HashMap::new();
    for (tid, (t, _)) in distinct.iter().enumerate() {
        for id in t.iter() {
            occurrences.entry(id).or_default().push(tid);
        }
    }
    itemsets
        .iter()
        .map(|iset| {
            let shortest = iset
                .iter()
                .map(|id| occurrences.get(id).map_or(&[][..], |v| v.as_slice()))
                .min_by_key(|v| v.len());
            match shortest {
                None => transactions.len() as u64,
                Some(tids) => tids
                    .iter()
                    .filter(|&&tid| iset.is_subset(distinct[tid].0))
                    .map(|&tid| distinct[tid].1)
                    .sum(),
            }
        })
        .collect()
}

/// Pairs every mined itemset with its support in `alpha`.
pub fn build_isr(
    itemsets: &FrequentItemsets,
    alpha: &[DefectState],
    config: ModelConfig,
    provenance: Provenance,
) -> Result<IsrModel> {
    let keys: Vec<&DefectState> = itemsets.entries.keys().collect();
    let alpha_supports = supports_in(&keys, alpha);
    let entries = itemsets
        .iter()
        .zip(alpha_supports)
        .map(|((itemset, beta_support), alpha_support)| ModelEntry {
            itemset: itemset.clone(),
            beta_support,
            alpha_support,
        })
        .collect();
    IsrModel::from_entries(entries, config, provenance)
}

pub fn log_digest(log: &TransactionLog) -> String {
    let mut buf = Vec::new();
    // writing to a Vec cannot fail
    let _ = write_transactions(log, &mut buf);
    let digest = Sha256::digest(&buf);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Bad states, labeling, mining and ratio construction in one pass.
pub fn train(
    log: &TransactionLog,
    pre_cfg: &PreprocessConfig,
    miner_cfg: &MinerConfig,
) -> Result<IsrModel> {
    pre_cfg.validate()?;
    miner_cfg.validate()?;

    let bad = compute_bad_states(log, pre_cfg);
    let data = label_transitions(log, &bad);
    let itemsets = mine_frequent_itemsets(&data.beta, miner_cfg)?;

    let (start, end) = log.date_range().unzip();
    let provenance = Provenance {
        training_start: start,
        training_end: end,
        n_rows: log.len() as u64,
        n_vehicles: log.vehicle_count() as u64,
        n_alpha: data.alpha.len() as u64,
        n_beta: data.beta.len() as u64,
        n_bad_states: bad.len() as u64,
        log_digest: log_digest(log),
    };
    let config = ModelConfig {
        delta: pre_cfg.delta,
        min_support: miner_cfg.min_support,
        max_itemset_size: miner_cfg.max_itemset_size,
        smoothing: miner_cfg.smoothing,
    };
    build_isr(&itemsets, &data.alpha, config, provenance)
}
