//! Non-sequential comparison model: each head is a sigmoid over a linear
//! function of the same four scaled features, with no recurrence.

use serde::{Deserialize, Serialize};

use super::features::{FeatureScaling, FeatureVector};
use super::network::sigmoid;
use super::train::Sequence;
use super::{DecisionModel, PredictionTriple, SequenceState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub scaling: FeatureScaling,
    /// Weights then bias, for the classifier, precision and f-measure heads.
    pub heads: [[f64; 5]; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { epochs: 400, lr: 0.05 }
    }
}

fn linear(w: &[f64; 5], x: &[f64; 4]) -> f64 {
    w[4] + w[..4].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

impl LinearBaseline {
    /// Full-batch Adam on cross-entropy (classifier) and squared error
    /// (regressors). Deterministic; starts from zero weights.
    pub fn fit(data: &[Sequence], cfg: &BaselineConfig) -> Result<Self> {
        let steps: usize = data.iter().map(Sequence::len).sum();
        if steps == 0 {
            return Err(Error::InvalidArgument("baseline needs at least one decision".into()));
        }
        let scaling = FeatureScaling::fit(data.iter().flat_map(|s| &s.features));
        let rows: Vec<([f64; 4], [f64; 3])> = data
            .iter()
            .flat_map(|s| s.features.iter().zip(&s.labels))
            .map(|(f, l)| (scaling.apply(f), [f64::from(l.correct), l.p_prefix, l.f_prefix]))
            .collect();
        let mut heads = [[0.0; 5]; 3];
        let mut m = [[0.0; 5]; 3];
        let mut v = [[0.0; 5]; 3];
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        for t in 1..=cfg.epochs {
            let mut grad = [[0.0; 5]; 3];
            for (x, y) in &rows {
                for h in 0..3 {
                    let out = sigmoid(linear(&heads[h], x));
                    // Cross-entropy through a sigmoid and squared error through a sigmoid.
                    let d = if h == 0 {
                        out - y[h]
                    } else {
                        2.0 * (out - y[h]) * out * (1.0 - out)
                    };
                    for k in 0..4 {
                        grad[h][k] += d * x[k];
                    }
                    grad[h][4] += d;
                }
            }
            let c1 = 1.0 - b1.powi(t as i32);
            let c2 = 1.0 - b2.powi(t as i32);
            for h in 0..3 {
                for k in 0..5 {
                    let g = grad[h][k] / rows.len() as f64;
                    m[h][k] = b1 * m[h][k] + (1.0 - b1) * g;
                    v[h][k] = b2 * v[h][k] + (1.0 - b2) * g * g;
                    heads[h][k] -= cfg.lr * (m[h][k] / c1) / ((v[h][k] / c2).sqrt() + eps);
                }
            }
        }
        if heads.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::Diverged {
                epoch: cfg.epochs,
                detail: "baseline weights are not finite".into(),
            });
        }
        Ok(LinearBaseline { scaling, heads })
    }

    pub fn predict_one(&self, f: &FeatureVector) -> PredictionTriple {
        let x = self.scaling.apply(f);
        PredictionTriple {
            pr_correct: sigmoid(linear(&self.heads[0], &x)),
            p_hat: sigmoid(linear(&self.heads[1], &x)),
            f_hat: sigmoid(linear(&self.heads[2], &x)),
        }
    }
}

impl DecisionModel for LinearBaseline {
    fn start(&self) -> SequenceState {
        SequenceState::default()
    }

    fn predict(&self, _state: &mut SequenceState, features: &FeatureVector) -> PredictionTriple {
        self.predict_one(features)
    }
}
