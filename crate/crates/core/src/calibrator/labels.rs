use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{DecisionHistory, Quality, ReferenceMatch};

/// Training targets for one decision: its correctness and the precision and
/// f-measure of the match formed by all earlier decisions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelTriple {
    pub correct: u8,
    pub p_prefix: f64,
    pub f_prefix: f64,
}

pub fn make_labels(history: &DecisionHistory, reference: &ReferenceMatch) -> Vec<LabelTriple> {
    let mut prefix = BTreeSet::new();
    let mut hits = 0usize;
    history
        .records
        .iter()
        .map(|r| {
            let q = Quality::from_counts(hits, prefix.len(), reference.known_size());
            let label = LabelTriple {
                correct: u8::from(reference.contains(r.pair)),
                p_prefix: q.precision,
                f_prefix: q.fmeasure,
            };
            if prefix.insert(r.pair) && reference.contains(r.pair) {
                hits += 1;
            }
            label
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecisionRecord, Pair};

    fn reference() -> ReferenceMatch {
        ReferenceMatch::new([(0, 0), (0, 1), (1, 2), (2, 3)].map(|(r, c)| Pair::new(r, c)))
    }

    #[test]
    fn example_history_labels() {
        let h = DecisionHistory::new(vec![
            DecisionRecord::new(0, 0, 0.9, 5.0),
            DecisionRecord::new(1, 1, 0.15, 15.0),
            DecisionRecord::new(0, 1, 0.25, 21.0),
            DecisionRecord::new(2, 3, 1.0, 24.0),
            DecisionRecord::new(1, 0, 0.3, 35.0),
        ]);
        let labels = make_labels(&h, &reference());
        assert_eq!(labels[0], LabelTriple { correct: 1, p_prefix: 0.0, f_prefix: 0.0 });
        let step4 = labels[3];
        assert_eq!(step4.correct, 1);
        assert!((step4.p_prefix - 2.0 / 3.0).abs() < 1e-15);
        assert!((step4.f_prefix - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(labels[4].correct, 0);
    }

    #[test]
    fn all_incorrect_history_has_zero_prefix_labels() {
        let h = DecisionHistory::new(vec![
            DecisionRecord::new(1, 1, 0.5, 1.0),
            DecisionRecord::new(2, 2, 0.5, 2.0),
            DecisionRecord::new(1, 1, 0.5, 3.0),
        ]);
        for l in make_labels(&h, &reference()) {
            assert_eq!((l.correct, l.p_prefix, l.f_prefix), (0, 0.0, 0.0));
        }
    }
}
