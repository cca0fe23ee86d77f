use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matchers::SimilarityMatrix;
use crate::model::{DecisionHistory, DecisionRecord, Pair};

/// Encoding of one decision: reported confidence, time spent, consensus and
/// algorithmic similarity. `delta_t` is raw seconds; scaling happens inside
/// the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub c: f64,
    pub delta_t: f64,
    pub a_e: f64,
    pub m_tilde: f64,
}

impl FeatureVector {
    pub const WIDTH: usize = 4;
}

/// How many matchers touched each pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMatrix {
    rows: usize,
    cols: usize,
    counts: Vec<u32>,
    matcher_total: u32,
}

impl ConsensusMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        ConsensusMatrix {
            rows,
            cols,
            counts: vec![0; rows * cols],
            matcher_total: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn count(&self, pair: Pair) -> u32 {
        self.counts[pair.row * self.cols + pair.col]
    }

    pub fn matcher_total(&self) -> u32 {
        self.matcher_total
    }

    /// Count divided by the number of matchers, zero when there are none.
    pub fn normalized(&self, pair: Pair) -> f64 {
        if self.matcher_total == 0 {
            0.0
        } else {
            f64::from(self.count(pair)) / f64::from(self.matcher_total)
        }
    }
}

/// Counts, per pair, the histories holding at least one record on it.
/// Records outside the grid are ignored.
pub fn build_consensus(histories: &[DecisionHistory], rows: usize, cols: usize) -> ConsensusMatrix {
    let mut out = ConsensusMatrix::empty(rows, cols);
    for h in histories {
        for p in h.touched() {
            if p.row < rows && p.col < cols {
                out.counts[p.row * cols + p.col] += 1;
            }
        }
    }
    out.matcher_total = histories.len() as u32;
    out
}

/// Inputs shared by every decision of a task.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureContext {
    pub consensus: ConsensusMatrix,
    pub algorithmic: SimilarityMatrix,
    pub session_start: f64,
}

impl FeatureContext {
    pub fn new(consensus: ConsensusMatrix, algorithmic: SimilarityMatrix) -> Result<Self> {
        if consensus.rows != algorithmic.rows() || consensus.cols != algorithmic.cols() {
            return Err(Error::DimensionMismatch {
                expected_rows: algorithmic.rows(),
                expected_cols: algorithmic.cols(),
                rows: consensus.rows,
                cols: consensus.cols,
            });
        }
        Ok(FeatureContext {
            consensus,
            algorithmic,
            session_start: 0.0,
        })
    }

    pub fn rows(&self) -> usize {
        self.algorithmic.rows()
    }

    pub fn cols(&self) -> usize {
        self.algorithmic.cols()
    }
}

/// Encodes a decision; the first decision's time is measured from the
/// session start.
pub fn encode_decision(
    record: &DecisionRecord,
    prev_timestamp: Option<f64>,
    ctx: &FeatureContext,
) -> Result<FeatureVector> {
    let p = record.pair;
    if p.row >= ctx.rows() || p.col >= ctx.cols() {
        return Err(Error::PairOutOfBounds {
            index: 0,
            pair: p,
            rows: ctx.rows(),
            cols: ctx.cols(),
        });
    }
    let since = prev_timestamp.unwrap_or(ctx.session_start);
    let delta_t = record.timestamp - since;
    if !(delta_t >= 0.0) {
        return Err(Error::TimestampRegression {
            last: since,
            found: record.timestamp,
        });
    }
    Ok(FeatureVector {
        c: record.confidence,
        delta_t,
        a_e: ctx.consensus.normalized(p),
        m_tilde: ctx.algorithmic.at(p),
    })
}

pub fn encode_history(history: &DecisionHistory, ctx: &FeatureContext) -> Result<Vec<FeatureVector>> {
    let mut prev = None;
    history
        .records
        .iter()
        .map(|r| {
            let v = encode_decision(r, prev, ctx);
            prev = Some(r.timestamp);
            v
        })
        .collect()
}

/// Min-max scaling of the time feature after clipping at a high percentile
/// of the training distribution. The other three features are already in
/// `[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for FeatureScaling {
    fn default() -> Self {
        FeatureScaling {
            delta_min: 0.0,
            delta_max: 1.0,
        }
    }
}

impl FeatureScaling {
    pub const CLIP_PERCENTILE: f64 = 0.99;

    pub fn fit<'a>(features: impl IntoIterator<Item = &'a FeatureVector>) -> Self {
        let mut deltas: Vec<f64> = features.into_iter().map(|f| f.delta_t).collect();
        if deltas.is_empty() {
            return FeatureScaling::default();
        }
        deltas.sort_by(f64::total_cmp);
        let min = deltas[0];
        let rank = ((deltas.len() - 1) as f64 * Self::CLIP_PERCENTILE).round() as usize;
        FeatureScaling {
            delta_min: min,
            delta_max: deltas[rank],
        }
    }

    pub fn apply(&self, f: &FeatureVector) -> [f64; 4] {
        let span = self.delta_max - self.delta_min;
        let delta = if span > 0.0 {
            (f.delta_t.clamp(self.delta_min, self.delta_max) - self.delta_min) / span
        } else {
            0.0
        };
        [f.c, delta, f.a_e, f.m_tilde]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> DecisionHistory {
        DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.9, 5.0),
            DecisionRecord::new(1, 1, 0.15, 15.0),
        ])
    }

    fn ctx() -> FeatureContext {
        FeatureContext::new(
            ConsensusMatrix::empty(3, 4),
            SimilarityMatrix::constant(3, 4, 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn consensus_counts_each_matcher_once() {
        let dup = DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.2, 1.0),
            DecisionRecord::new(0, 0, 0.7, 2.0),
        ]);
        let c = build_consensus(&[example(), example(), dup], 3, 4);
        assert_eq!(c.count(Pair::new(0, 0)), 3);
        assert_eq!(c.count(Pair::new(1, 1)), 2);
        assert_eq!(c.matcher_total(), 3);
        assert!((c.normalized(Pair::new(1, 1)) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn time_deltas() {
        let h = example();
        let ctx = ctx();
        let first = encode_decision(&h.records[0], None, &ctx).unwrap();
        assert_eq!(first.delta_t, 5.0);
        let second = encode_decision(&h.records[1], Some(5.0), &ctx).unwrap();
        assert_eq!(second, FeatureVector { c: 0.15, delta_t: 10.0, a_e: 0.0, m_tilde: 0.0 });
        assert!(encode_decision(&h.records[0], Some(6.0), &ctx).is_err());
    }

    #[test]
    fn scaling_clips_and_normalizes() {
        let fs: Vec<FeatureVector> = (0..=100)
            .map(|k| FeatureVector { c: 0.5, delta_t: k as f64, a_e: 0.0, m_tilde: 0.0 })
            .collect();
        let s = FeatureScaling::fit(&fs);
        assert_eq!((s.delta_min, s.delta_max), (0.0, 99.0));
        assert_eq!(s.apply(&fs[100])[1], 1.0);
        assert_eq!(s.apply(&fs[0])[1], 0.0);
    }
}
