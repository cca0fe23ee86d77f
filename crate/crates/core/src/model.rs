//! Schemata, matrices, matches and decision histories, plus the precision,
//! recall and f-measure of a match against a reference.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A candidate attribute pair: row indexes the first schema, column the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub row: usize,
    pub col: usize,
}

impl Pair {
    pub const fn new(row: usize, col: usize) -> Self {
        Pair { row, col }
    }

    /// One-based matrix label, `M11` for `(0, 0)`.
    pub fn label(&self) -> String {
        format!("M{}{}", self.row + 1, self.col + 1)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub id: usize,
    pub name: String,
    /// Ancestor names from the root, ending with the attribute's own name.
    pub path: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instances: Vec<String>,
}

impl Attribute {
    pub fn new(id: usize, name: impl Into<String>, path: Vec<String>) -> Self {
        Attribute {
            id,
            name: name.into(),
            path,
            datatype: None,
            instances: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl Schema {
    pub fn new(name: impl Into<String>, attributes: Vec<Attribute>) -> Result<Self> {
        let schema = Schema {
            name: name.into(),
            attributes,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// A schema whose attributes hang directly under the root.
    pub fn flat<S: AsRef<str>>(name: &str, names: &[S]) -> Result<Self> {
        let attributes = names
            .iter()
            .enumerate()
            .map(|(id, n)| {
                let n = n.as_ref();
                Attribute::new(id, n, vec![name.to_string(), n.to_string()])
            })
            .collect();
        Schema::new(name, attributes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "schema {} has no attributes",
                self.name
            )));
        }
        for (expected, attr) in self.attributes.iter().enumerate() {
            if attr.id != expected {
                return Err(Error::InvalidArgument(format!(
                    "schema {}: attribute {} has id {}, expected {}",
                    self.name, attr.name, attr.id, expected
                )));
            }
            if attr.path.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "schema {}: attribute {} has an empty path",
                    self.name, attr.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

/// An `n x m` grid of optional confidences; `None` marks an unassigned entry.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Option<f64>>,
}

impl MatchingMatrix {
    pub fn unassigned(rows: usize, cols: usize) -> Self {
        MatchingMatrix {
            rows,
            cols,
            entries: vec![None; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, pair: Pair) -> Option<f64> {
        self.entries[pair.row * self.cols + pair.col]
    }

    pub fn set(&mut self, pair: Pair, value: Option<f64>) -> Result<()> {
        if pair.row >= self.rows || pair.col >= self.cols {
            return Err(Error::DimensionMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                rows: pair.row + 1,
                cols: pair.col + 1,
            });
        }
        if let Some(v) = value {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange {
                    row: pair.row,
                    col: pair.col,
                    value: v,
                });
            }
        }
        self.entries[pair.row * self.cols + pair.col] = value;
        Ok(())
    }

    /// Assigned entries in row-major order.
    pub fn assigned(&self) -> impl Iterator<Item = (Pair, f64)> + '_ {
        self.entries.iter().enumerate().filter_map(|(k, v)| {
            v.map(|v| (Pair::new(k / self.cols, k % self.cols), v))
        })
    }

    pub fn assigned_count(&self) -> usize {
        self.entries.iter().filter(|v| v.is_some()).count()
    }

    /// The match made of every assigned entry.
    pub fn to_match(&self) -> Match {
        self.assigned().map(|(p, v)| (p, Some(v))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    #[serde(flatten)]
    pub pair: Pair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// A set of correspondences, keyed by pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Match {
    entries: BTreeMap<Pair, Option<f64>>,
}

impl Match {
    pub fn new() -> Self {
        Match::default()
    }

    /// Inserts or replaces the value held for `pair`.
    pub fn insert(&mut self, pair: Pair, value: Option<f64>) {
        self.entries.insert(pair, value);
    }

    pub fn remove(&mut self, pair: Pair) -> bool {
        self.entries.remove(&pair).is_some()
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.entries.contains_key(&pair)
    }

    pub fn value(&self, pair: Pair) -> Option<f64> {
        self.entries.get(&pair).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Correspondence> + '_ {
        self.entries
            .iter()
            .map(|(&pair, &value)| Correspondence { pair, value })
    }

    pub fn pair_set(&self) -> BTreeSet<Pair> {
        self.entries.keys().copied().collect()
    }

    pub fn is_subset(&self, other: &Match) -> bool {
        self.pairs().all(|p| other.contains(p))
    }

    pub fn first_overlap(&self, other: &Match) -> Option<Pair> {
        self.pairs().find(|&p| other.contains(p))
    }
}

impl FromIterator<(Pair, Option<f64>)> for Match {
    fn from_iter<I: IntoIterator<Item = (Pair, Option<f64>)>>(iter: I) -> Self {
        Match {
            entries: iter.into_iter().collect(),
        }
    }
}

impl FromIterator<Pair> for Match {
    fn from_iter<I: IntoIterator<Item = Pair>>(iter: I) -> Self {
        iter.into_iter().map(|p| (p, None)).collect()
    }
}

impl FromIterator<Correspondence> for Match {
    fn from_iter<I: IntoIterator<Item = Correspondence>>(iter: I) -> Self {
        iter.into_iter().map(|c| (c.pair, c.value)).collect()
    }
}

/// The binary ground truth.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReferenceMatch {
    pairs: BTreeSet<Pair>,
}

impl ReferenceMatch {
    pub fn new(pairs: impl IntoIterator<Item = Pair>) -> Self {
        ReferenceMatch {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.pairs.contains(&pair)
    }

    pub fn known_size(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.pairs.iter().copied()
    }

    pub fn indicator(&self, pair: Pair) -> f64 {
        if self.contains(pair) {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    #[serde(flatten)]
    pub pair: Pair,
    pub confidence: f64,
    /// Seconds since session start.
    #[serde(rename = "t")]
    pub timestamp: f64,
}

impl DecisionRecord {
    pub fn new(row: usize, col: usize, confidence: f64, timestamp: f64) -> Self {
        DecisionRecord {
            pair: Pair::new(row, col),
            confidence,
            timestamp,
        }
    }
}

/// A matcher's decisions in the order they were made.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecisionHistory {
    pub records: Vec<DecisionRecord>,
}

impl DecisionHistory {
    pub fn new(records: Vec<DecisionRecord>) -> Self {
        DecisionHistory { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.records.iter()
    }

    pub fn touched(&self) -> HashSet<Pair> {
        self.records.iter().map(|r| r.pair).collect()
    }

    pub fn distinct_pairs(&self) -> usize {
        self.touched().len()
    }
}

impl FromIterator<DecisionRecord> for DecisionHistory {
    fn from_iter<I: IntoIterator<Item = DecisionRecord>>(iter: I) -> Self {
        DecisionHistory::new(iter.into_iter().collect())
    }
}

/// Projects a history onto a matrix; the latest record on a pair wins.
pub fn history_to_matrix(
    history: &DecisionHistory,
    rows: usize,
    cols: usize,
) -> Result<MatchingMatrix> {
    let mut matrix = MatchingMatrix::unassigned(rows, cols);
    for (index, record) in history.records.iter().enumerate() {
        let pair = record.pair;
        if pair.row >= rows || pair.col >= cols {
            return Err(Error::PairOutOfBounds {
                index,
                pair,
                rows,
                cols,
            });
        }
        matrix.entries[pair.row * cols + pair.col] = Some(record.confidence);
    }
    Ok(matrix)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    PairOutOfBounds { index: usize, pair: Pair },
    ConfidenceOutOfRange { index: usize },
    NegativeTimestamp { index: usize },
    NonIncreasingTimestamp { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PairOutOfBounds { index, pair } => {
                write!(f, "record {index}: pair {pair} out of bounds")
            }
            Violation::ConfidenceOutOfRange { index } => {
                write!(f, "record {index}: confidence out of range")
            }
            Violation::NegativeTimestamp { index } => {
                write!(f, "record {index}: negative timestamp")
            }
            Violation::NonIncreasingTimestamp { index } => {
                write!(f, "record {index}: non-increasing timestamp")
            }
        }
    }
}

pub fn validate_history(history: &DecisionHistory, rows: usize, cols: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut last: Option<f64> = None;
    for (index, r) in history.records.iter().enumerate() {
        if r.pair.row >= rows || r.pair.col >= cols {
            out.push(Violation::PairOutOfBounds {
                index,
                pair: r.pair,
            });
        }
        if !(0.0..=1.0).contains(&r.confidence) {
            out.push(Violation::ConfidenceOutOfRange { index });
        }
        if !(r.timestamp >= 0.0) {
            out.push(Violation::NegativeTimestamp { index });
        }
        if let Some(prev) = last {
            if !(r.timestamp > prev) {
                out.push(Violation::NonIncreasingTimestamp { index });
            }
        }
        last = Some(r.timestamp);
    }
    out
}

/// Counts behind the three measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub hits: usize,
    pub size: usize,
    pub reference_size: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

impl Quality {
    pub fn from_counts(hits: usize, size: usize, reference_size: usize) -> Self {
        let precision = ratio(hits, size);
        let recall = ratio(hits, reference_size);
        let fmeasure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Quality {
            hits,
            size,
            reference_size,
            precision,
            recall,
            fmeasure,
        }
    }

    pub fn of(sigma: &Match, reference: &ReferenceMatch) -> Self {
        let hits = sigma.pairs().filter(|&p| reference.contains(p)).count();
        Quality::from_counts(hits, sigma.len(), reference.known_size())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `|σ ∩ σ*| / |σ|`, zero for an empty match.
pub fn precision(sigma: &Match, reference: &ReferenceMatch) -> f64 {
    Quality::of(sigma, reference).precision
}

/// `|σ ∩ σ*| / |σ*|`, zero for an empty reference.
pub fn recall(sigma: &Match, reference: &ReferenceMatch) -> f64 {
    Quality::of(sigma, reference).recall
}

/// Harmonic mean of precision and recall, zero when both vanish.
pub fn fmeasure(sigma: &Match, reference: &ReferenceMatch) -> f64 {
    Quality::of(sigma, reference).fmeasure
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(labels: &[(usize, usize)]) -> Match {
        labels.iter().map(|&(r, c)| Pair::new(r - 1, c - 1)).collect()
    }

    fn reference() -> ReferenceMatch {
        ReferenceMatch::new([(1, 1), (1, 2), (2, 3), (3, 4)].map(|(r, c)| Pair::new(r - 1, c - 1)))
    }

    fn example_history() -> DecisionHistory {
        DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.9, 5.0),
            DecisionRecord::new(1, 1, 0.15, 15.0),
            DecisionRecord::new(0, 1, 0.25, 21.0),
            DecisionRecord::new(2, 3, 1.0, 24.0),
            DecisionRecord::new(1, 0, 0.3, 35.0),
        ])
    }

    #[test]
    fn example_history_projects_five_entries() {
        let matrix = history_to_matrix(&example_history(), 3, 4).unwrap();
        assert_eq!(matrix.assigned_count(), 5);
        assert_eq!(matrix.get(Pair::new(0, 0)), Some(0.9));
        assert_eq!(matrix.get(Pair::new(1, 1)), Some(0.15));
        assert_eq!(matrix.get(Pair::new(0, 1)), Some(0.25));
        assert_eq!(matrix.get(Pair::new(2, 3)), Some(1.0));
        assert_eq!(matrix.get(Pair::new(1, 0)), Some(0.3));
        assert_eq!(matrix.get(Pair::new(2, 2)), None);
    }

    #[test]
    fn empty_history_gives_unassigned_matrix() {
        let matrix = history_to_matrix(&DecisionHistory::default(), 3, 4).unwrap();
        assert_eq!(matrix.assigned_count(), 0);
    }

    #[test]
    fn latest_record_wins() {
        let h = DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.4, 1.0),
            DecisionRecord::new(0, 0, 0.8, 2.0),
        ]);
        let matrix = history_to_matrix(&h, 1, 1).unwrap();
        assert_eq!(matrix.get(Pair::new(0, 0)), Some(0.8));
    }

    #[test]
    fn out_of_bounds_names_record() {
        let h = DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.4, 1.0),
            DecisionRecord::new(5, 0, 0.8, 2.0),
        ]);
        match history_to_matrix(&h, 3, 4) {
            Err(Error::PairOutOfBounds { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn human_match_quality() {
        let q = Quality::of(&m(&[(1, 1), (2, 2), (1, 2), (3, 4), (2, 1)]), &reference());
        assert!((q.precision - 0.6).abs() < 1e-12);
        assert!((q.recall - 0.75).abs() < 1e-12);
        assert!((q.fmeasure - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{:.2}", q.fmeasure), "0.67");
    }

    #[test]
    fn algorithmic_match_quality() {
        let alg = m(&[(1, 1), (1, 2), (1, 3), (1, 4), (3, 1), (3, 2), (3, 4)]);
        let q = Quality::of(&alg, &reference());
        assert_eq!(format!("{:.2}", q.precision), "0.43");
        assert!((q.recall - 0.75).abs() < 1e-12);
        assert_eq!(format!("{:.2}", q.fmeasure), "0.55");
    }

    #[test]
    fn identity_match_is_perfect() {
        let r = reference();
        let sigma: Match = r.pairs().collect();
        let q = Quality::of(&sigma, &r);
        assert_eq!((q.precision, q.recall, q.fmeasure), (1.0, 1.0, 1.0));
    }

    #[test]
    fn degenerate_measures_are_zero() {
        let q = Quality::of(&Match::new(), &reference());
        assert_eq!((q.precision, q.recall, q.fmeasure), (0.0, 0.0, 0.0));
        let q = Quality::of(&m(&[(1, 1)]), &ReferenceMatch::default());
        assert_eq!((q.precision, q.recall, q.fmeasure), (0.0, 0.0, 0.0));
    }

    #[test]
    fn validation_flags_each_problem() {
        assert!(validate_history(&example_history(), 3, 4).is_empty());
        let h = DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.5, 3.0),
            DecisionRecord::new(0, 1, 1.2, 3.0),
        ]);
        let v = validate_history(&h, 3, 4);
        assert!(v.contains(&Violation::NonIncreasingTimestamp { index: 1 }));
        assert!(v.contains(&Violation::ConfidenceOutOfRange { index: 1 }));
        assert_eq!(v[0].to_string(), "record 1: confidence out of range");
    }

    #[test]
    fn schema_requires_contiguous_ids() {
        let bad = Schema::new("s", vec![Attribute::new(1, "a", vec!["a".into()])]);
        assert!(bad.is_err());
        assert!(Schema::flat("s", &["a", "b"]).is_ok());
    }
}
