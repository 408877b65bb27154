//! Shared domain vocabulary: defects, defect states, observations, the
//! transaction log, and exact ratios.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

// ── Defects ─────────────────────────────────────────────────────────────

/// Opaque defect token such as `d1` or `BRAKE_PAD_WEAR`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefectId(String);

impl DefectId {
    pub fn new(token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        let reason = if token.is_empty() {
            Some("empty token")
        } else if token.contains([',', ';', '\n', '\r']) {
            Some("contains a separator character")
        } else if token.trim() != token {
            Some("leading or trailing whitespace")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidDefectId { token, reason }),
            None => Ok(DefectId(token)),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DefectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for DefectId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DefectId::new(s)
    }
}

impl Serialize for DefectId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for DefectId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DefectId::new(s).map_err(serde::de::Error::custom)
    }
}

/// The set of unresolved defects on a vehicle. Ordering is lexicographic over
/// the sorted id sequence, and the text form is `d1;d2;d3`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefectState(BTreeSet<DefectId>);

impl DefectState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: &DefectId) -> bool {
        self.0.contains(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DefectId> + '_ {
        self.0.iter()
    }

    pub fn is_subset(&self, other: &DefectState) -> bool {
        self.0.len() <= other.0.len() && self.0.is_subset(&other.0)
    }

    pub fn insert(&mut self, id: DefectId) -> bool {
        self.0.insert(id)
    }

    pub fn remove(&mut self, id: &DefectId) -> bool {
        self.0.remove(id)
    }

    pub fn intersection(&self, other: &DefectState) -> DefectState {
        DefectState(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn union(&self, other: &DefectState) -> DefectState {
        DefectState(self.0.union(&other.0).cloned().collect())
    }

    /// Parses the semicolon form. An empty string is the empty state.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Self::empty());
        }
        canonicalize_state(text.split(';').map(|t| t.trim()))
    }
}

impl fmt::Display for DefectState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            f.write_str(id.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for DefectState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DefectState::parse(s)
    }
}

impl FromIterator<DefectId> for DefectState {
    fn from_iter<I: IntoIterator<Item = DefectId>>(iter: I) -> Self {
        DefectState(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a DefectState {
    type Item = &'a DefectId;
    type IntoIter = std::collections::btree_set::Iter<'a, DefectId>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl Serialize for DefectState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DefectState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DefectState::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Builds a duplicate-free state from raw tokens, validating each one.
pub fn canonicalize_state<I, S>(ids: I) -> Result<DefectState>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    ids.into_iter()
        .map(|t| DefectId::new(t.as_ref()))
        .collect::<Result<BTreeSet<_>>>()
        .map(DefectState)
}

/// `|a ∩ b|` and `|a ∪ b|`. Two empty sets count as identical (1/1).
pub fn jaccard_counts(a: &DefectState, b: &DefectState) -> (usize, usize) {
    if a.is_empty() && b.is_empty() {
        return (1, 1);
    }
    let inter = a.0.intersection(&b.0).count();
    (inter, a.len() + b.len() - inter)
}

pub fn jaccard(a: &DefectState, b: &DefectState) -> f64 {
    let (inter, union) = jaccard_counts(a, b);
    inter as f64 / union as f64
}

// ── Observations and the transaction log ────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Available,
    Down,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Available => "Available",
            Status::Down => "Down",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("available") {
            Ok(Status::Available)
        } else if t.eq_ignore_ascii_case("down") {
            Ok(Status::Down)
        } else {
            Err(format!("unknown status {s:?}"))
        }
    }
}

/// One vehicle-day: what was open on the vehicle and what the supervisor decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub vehicle_id: String,
    pub date: NaiveDate,
    pub state: DefectState,
    pub status: Status,
}

/// Observations sorted by `(vehicle_id, date)` with unique keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransactionLog {
    rows: Vec<Observation>,
}

impl TransactionLog {
    /// Sorts the rows and rejects duplicate `(vehicle_id, date)` keys.
    pub fn from_rows(mut rows: Vec<Observation>) -> Result<Self> {
        rows.sort_by(|a, b| (&a.vehicle_id, a.date).cmp(&(&b.vehicle_id, b.date)));
        if let Some(w) = rows
            .windows(2)
            .find(|w| w[0].vehicle_id == w[1].vehicle_id && w[0].date == w[1].date)
        {
            return Err(Error::DuplicateObservation {
                vehicle_id: w[1].vehicle_id.clone(),
                date: w[1].date,
                line: 0,
            });
        }
        Ok(TransactionLog { rows })
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vehicle_count(&self) -> usize {
        self.rows
            .windows(2)
            .filter(|w| w[0].vehicle_id != w[1].vehicle_id)
            .count()
            + usize::from(!self.rows.is_empty())
    }

    /// Earliest and latest observation dates.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.rows.iter().map(|r| r.date).min()?;
        let last = self.rows.iter().map(|r| r.date).max()?;
        Some((first, last))
    }

    /// Rows for one vehicle, in date order.
    pub fn vehicle_rows(&self, vehicle_id: &str) -> &[Observation] {
        let start = self
            .rows
            .partition_point(|r| r.vehicle_id.as_str() < vehicle_id);
        let end = self
            .rows
            .partition_point(|r| r.vehicle_id.as_str() <= vehicle_id);
        &self.rows[start..end]
    }

    /// Position of `(vehicle_id, date)` in the log.
    pub fn position(&self, vehicle_id: &str, date: NaiveDate) -> Option<usize> {
        self.rows
            .binary_search_by(|r| (r.vehicle_id.as_str(), r.date).cmp(&(vehicle_id, date)))
            .ok()
    }

    /// Keeps rows whose date satisfies the predicate.
    pub fn filter_dates(&self, keep: impl Fn(NaiveDate) -> bool) -> TransactionLog {
        TransactionLog {
            rows: self.rows.iter().filter(|r| keep(r.date)).cloned().collect(),
        }
    }

    /// Sorted distinct observation dates.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let set: BTreeSet<NaiveDate> = self.rows.iter().map(|r| r.date).collect();
        set.into_iter().collect()
    }
}

// ── Exact ratios ────────────────────────────────────────────────────────

/// A non-negative ratio of counts compared exactly by cross-multiplication.
///
/// `n/0` with `n > 0` sits above every finite ratio; among those, a larger
/// numerator ranks higher. `0/0` cannot be constructed. Equality is by value,
/// so `1/2 == 2/4`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "(u64, u64)", into = "(u64, u64)")]
pub struct Ratio {
    numerator: u64,
    denominator: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio {
        numerator: 0,
        denominator: 1,
    };

    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if numerator == 0 && denominator == 0 {
            return Err(Error::ZeroOverZero);
        }
        Ok(Ratio {
            numerator,
            denominator,
        })
    }

    pub fn numerator(self) -> u64 {
        self.numerator
    }

    pub fn denominator(self) -> u64 {
        self.denominator
    }

    pub fn is_infinite(self) -> bool {
        self.denominator == 0
    }

    pub fn is_zero(self) -> bool {
        self.numerator == 0
    }

    /// Display projection; infinite ratios map to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        if self.denominator == 0 {
            f64::INFINITY
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }
}

impl TryFrom<(u64, u64)> for Ratio {
    type Error = Error;
    fn try_from((n, d): (u64, u64)) -> Result<Self> {
        Ratio::new(n, d)
    }
}

impl From<Ratio> for (u64, u64) {
    fn from(r: Ratio) -> Self {
        (r.numerator, r.denominator)
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_infinite(), other.is_infinite()) {
            (true, true) => self.numerator.cmp(&other.numerator),
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => {
                let lhs = self.numerator as u128 * other.denominator as u128;
                let rhs = other.numerator as u128 * self.denominator as u128;
                lhs.cmp(&rhs)
            }
        }
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{:.6}", self.to_f64())
        }
    }
}
