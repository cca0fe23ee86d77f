//! Monotonicity of precision, recall and f-measure as a match grows, and the
//! expectation estimators that turn confidences into accept/reject conditions.
//!
//! Deterministic conditions compare exact ratios by cross multiplication. An
//! empty match takes the precision of whatever is added to it, and an empty
//! addition takes the precision of the match it extends, so neither side of
//! an inequality is ever undefined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Match, Pair, ReferenceMatch};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "r", alias = "recall")]
    Recall,
    #[serde(rename = "p", alias = "precision")]
    Precision,
    #[serde(rename = "f", alias = "fmeasure")]
    FMeasure,
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "recall" => Ok(MeasureKind::Recall),
            "p" | "precision" => Ok(MeasureKind::Precision),
            "f" | "fmeasure" | "f-measure" | "f1" => Ok(MeasureKind::FMeasure),
            other => Err(Error::InvalidArgument(format!("unknown measure {other:?}"))),
        }
    }
}

impl std::fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeasureKind::Recall => "R",
            MeasureKind::Precision => "P",
            MeasureKind::FMeasure => "F",
        })
    }
}

/// Correspondences paired with the probability that each is correct.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfidenceMatch {
    entries: Vec<(Pair, f64)>,
}

impl ConfidenceMatch {
    pub fn new(entries: Vec<(Pair, f64)>) -> Result<Self> {
        for (k, &(p, c)) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::ValueOutOfRange {
                    row: p.row,
                    col: p.col,
                    value: c,
                });
            }
            if entries[..k].iter().any(|&(q, _)| q == p) {
                return Err(Error::InvalidArgument(format!("duplicate pair {p}")));
            }
        }
        Ok(ConfidenceMatch { entries })
    }

    /// Confidences on consecutive synthetic pairs, for callers that only care
    /// about the values.
    pub fn from_confidences(confidences: &[f64]) -> Result<Self> {
        ConfidenceMatch::new(
            confidences
                .iter()
                .enumerate()
                .map(|(k, &c)| (Pair::new(0, k), c))
                .collect(),
        )
    }

    /// Valued entries of a match; unvalued ones are skipped.
    pub fn from_match(sigma: &Match) -> Result<Self> {
        ConfidenceMatch::new(sigma.iter().filter_map(|c| c.value.map(|v| (c.pair, v))).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Pair, f64)] {
        &self.entries
    }

    pub fn confidences(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, c)| c)
    }

    pub fn with(&self, pair: Pair, confidence: f64) -> Result<Self> {
        let mut entries = self.entries.clone();
        entries.push((pair, confidence));
        ConfidenceMatch::new(entries)
    }
}

struct Counts {
    hits: u64,
    size: u64,
}

fn counts(sigma: &Match, reference: &ReferenceMatch) -> Counts {
    Counts {
        hits: sigma.pairs().filter(|&p| reference.contains(p)).count() as u64,
        size: sigma.len() as u64,
    }
}

fn check_disjoint(sigma: &Match, delta: &Match) -> Result<()> {
    match sigma.first_overlap(delta) {
        Some(p) => Err(Error::Overlap(p)),
        None => Ok(()),
    }
}

/// `P(σ) <= P(Δ)`: the pair `(σ, σ ∪ Δ)` lies in the precision-monotone region.
pub fn in_sigma_p(sigma: &Match, delta: &Match, reference: &ReferenceMatch) -> Result<bool> {
    check_disjoint(sigma, delta)?;
    let (s, d) = (counts(sigma, reference), counts(delta, reference));
    if s.size == 0 || d.size == 0 {
        return Ok(true);
    }
    Ok(s.hits * d.size <= d.hits * s.size)
}

/// `0.5 F(σ) <= P(Δ)`: the pair `(σ, σ ∪ Δ)` lies in the f-measure-monotone region.
pub fn in_sigma_f(sigma: &Match, delta: &Match, reference: &ReferenceMatch) -> Result<bool> {
    check_disjoint(sigma, delta)?;
    let (s, d) = (counts(sigma, reference), counts(delta, reference));
    let r = reference.known_size() as u64;
    if d.size == 0 {
        // P(Δ) := P(σ), and |σ∩σ*|/(|σ|+|σ*|) never exceeds |σ∩σ*|/|σ|.
        return Ok(true);
    }
    Ok(s.hits * d.size <= d.hits * (s.size + r))
}

/// Whether `G(σ) <= G(σ')` for `σ ⊆ σ'`.
pub fn is_miem_pair(
    kind: MeasureKind,
    sigma: &Match,
    sigma2: &Match,
    reference: &ReferenceMatch,
) -> Result<bool> {
    if let Some(p) = sigma.pairs().find(|&p| !sigma2.contains(p)) {
        return Err(Error::NotSubset(p));
    }
    let (a, b) = (counts(sigma, reference), counts(sigma2, reference));
    let r = reference.known_size() as u64;
    Ok(match kind {
        MeasureKind::Recall => a.hits <= b.hits,
        MeasureKind::Precision => {
            // P(∅) takes the value of the match it grows into.
            a.size == 0 || b.size == 0 || a.hits * b.size <= b.hits * a.size
        }
        MeasureKind::FMeasure => {
            let (da, db) = (a.size + r, b.size + r);
            da == 0 || db == 0 || a.hits * db <= b.hits * da
        }
    })
}

/// Mean confidence; zero for an empty match.
pub fn expected_precision(cm: &ConfidenceMatch) -> f64 {
    if cm.is_empty() {
        return 0.0;
    }
    cm.confidences().sum::<f64>() / cm.len() as f64
}

/// `2 Σc / (|σ| + |σ*|)`.
pub fn expected_fmeasure(cm: &ConfidenceMatch, ref_size: usize) -> Result<f64> {
    if ref_size < 1 {
        return Err(Error::InvalidArgument("reference size must be at least 1".into()));
    }
    Ok(expected_fmeasure_unchecked(cm.confidences().sum(), cm.len(), ref_size))
}

pub(crate) fn expected_fmeasure_unchecked(confidence_sum: f64, size: usize, ref_size: usize) -> f64 {
    // An empty float sum is -0.0; keep the empty match at +0.
    if size == 0 {
        return 0.0;
    }
    2.0 * confidence_sum / (size + ref_size) as f64
}

/// Whether adding a correspondence that is correct with probability
/// `delta_prob` cannot lower the expected measure.
pub fn prob_annealer_condition(
    kind: MeasureKind,
    cm: &ConfidenceMatch,
    delta_prob: f64,
    ref_size: usize,
) -> Result<bool> {
    if !(0.0..=1.0).contains(&delta_prob) {
        return Err(Error::InvalidArgument(format!(
            "probability {delta_prob} outside [0,1]"
        )));
    }
    Ok(match kind {
        MeasureKind::Recall => true,
        MeasureKind::Precision => expected_precision(cm) <= delta_prob,
        MeasureKind::FMeasure => 0.5 * expected_fmeasure(cm, ref_size)? <= delta_prob,
    })
}

pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Exact `(E(P), E(F))` by enumerating every correctness outcome, treating
/// each confidence as an independent Bernoulli parameter and `|σ*|` as fixed.
pub fn brute_force_expectations(cm: &ConfidenceMatch, ref_size: usize) -> Result<(f64, f64)> {
    let k = cm.len();
    if k > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "{k} correspondences exceed the enumeration limit of {BRUTE_FORCE_LIMIT}"
        )));
    }
    if ref_size < 1 {
        return Err(Error::InvalidArgument("reference size must be at least 1".into()));
    }
    let probs: Vec<f64> = cm.confidences().collect();
    let (mut ep, mut ef) = (0.0, 0.0);
    for outcome in 0u32..(1u32 << k) {
        let mut weight = 1.0;
        for (bit, &p) in probs.iter().enumerate() {
            weight *= if outcome >> bit & 1 == 1 { p } else { 1.0 - p };
        }
        let hits = outcome.count_ones() as f64;
        if k > 0 {
            ep += weight * hits / k as f64;
        }
        ef += weight * 2.0 * hits / (k + ref_size) as f64;
    }
    Ok((ep, ef))
}
