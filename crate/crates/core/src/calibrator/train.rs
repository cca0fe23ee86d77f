use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{encode_history, FeatureContext, FeatureScaling, FeatureVector};
use super::labels::{make_labels, LabelTriple};
use super::network::{HeadWeights, Network, NetworkShape};
use super::{CalibratorParams, HeadLayout};
use crate::error::{Error, Result};
use crate::model::{DecisionHistory, ReferenceMatch};

/// One matcher's encoded history with its training targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<LabelTriple>,
}

impl Sequence {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<LabelTriple>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        Ok(Sequence { features, labels })
    }

    pub fn from_history(
        history: &DecisionHistory,
        reference: &ReferenceMatch,
        ctx: &FeatureContext,
    ) -> Result<Self> {
        Sequence::new(encode_history(history, ctx)?, make_labels(history, reference))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub shape: NetworkShape,
    pub layout: HeadLayout,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: Option<usize>,
    /// Share of the dataset held out by [`train`] for model selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            shape: NetworkShape::default(),
            layout: HeadLayout::Shared,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 50,
            batch: 16,
            seed: 0,
            patience: Some(5),
            validation_fraction: 0.2,
        }
    }
}

/// Mean per-step loss after each epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub params: CalibratorParams,
    pub report: TrainReport,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, w: &mut [f64], g: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for k in 0..w.len() {
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g[k];
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            w[k] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
}

struct Prepared<'a> {
    xs: Vec<[f64; 4]>,
    labels: &'a [LabelTriple],
}

fn prepare<'a>(data: &'a [Sequence], scaling: &FeatureScaling) -> Vec<Prepared<'a>> {
    data.iter()
        .map(|s| Prepared {
            xs: s.features.iter().map(|f| scaling.apply(f)).collect(),
            labels: &s.labels,
        })
        .collect()
}

/// Summed gradient of a batch in a fixed order, plus summed loss and step count.
fn batch_gradient(net: &Network, heads: HeadWeights, batch: &[&Prepared]) -> (Vec<f64>, f64, usize) {
    let parts: Vec<(Vec<f64>, f64)> = batch
        .par_iter()
        .map(|s| {
            let mut g = vec![0.0; net.weights.len()];
            let caches = net.forward_cached(&s.xs);
            let loss = net.backward(&caches, s.labels, heads, 1.0, &mut g);
            (g, loss)
        })
        .collect();
    let mut total = vec![0.0; net.weights.len()];
    let mut loss = 0.0;
    for (g, l) in parts {
        for (t, v) in total.iter_mut().zip(&g) {
            *t += v;
        }
        loss += l;
    }
    (total, loss, batch.iter().map(|s| s.xs.len()).sum())
}

fn mean_loss(params: &CalibratorParams, data: &[Prepared]) -> f64 {
    let steps: usize = data.iter().map(|s| s.xs.len()).sum();
    if steps == 0 {
        return 0.0;
    }
    let losses: Vec<f64> = data
        .par_iter()
        .map(|s| {
            params
                .networks
                .iter()
                .enumerate()
                .map(|(k, n)| n.sequence_loss(&s.xs, s.labels, params.layout.heads(k)))
                .sum()
        })
        .collect();
    losses.iter().sum::<f64>() / steps as f64
}

fn check_config(cfg: &TrainConfig) -> Result<()> {
    let ok = cfg.lr > 0.0
        && (0.0..1.0).contains(&cfg.beta1)
        && (0.0..1.0).contains(&cfg.beta2)
        && cfg.eps > 0.0
        && cfg.batch > 0
        && (0.0..1.0).contains(&cfg.validation_fraction)
        && cfg.shape.input == FeatureVector::WIDTH
        && cfg.shape.hidden > 0
        && cfg.shape.dense > 0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("invalid training configuration {cfg:?}")))
    }
}

/// Trains on `dataset`, holding out `validation_fraction` of the sequences
/// (chosen by the seed) for model selection.
pub fn train(dataset: &[Sequence], cfg: &TrainConfig) -> Result<Trained> {
    check_config(cfg)?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed)));
    let held = ((dataset.len() as f64 * cfg.validation_fraction).ceil() as usize)
        .min(dataset.len() - 1);
    let (val_idx, train_idx) = idx.split_at(held);
    let pick = |ix: &[usize]| ix.iter().map(|&i| dataset[i].clone()).collect::<Vec<_>>();
    train_split(&pick(train_idx), &pick(val_idx), cfg)
}

/// Trains with an explicit validation set; with an empty one, selection
/// falls back to the training loss.
pub fn train_split(train: &[Sequence], validation: &[Sequence], cfg: &TrainConfig) -> Result<Trained> {
    check_config(cfg)?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    for s in train.iter().chain(validation) {
        if s.features.len() != s.labels.len() {
            return Err(Error::InvalidArgument("sequence with mismatched labels".into()));
        }
    }
    let scaling = FeatureScaling::fit(train.iter().flat_map(|s| &s.features));
    let mut params = CalibratorParams::init(cfg.shape, cfg.layout, cfg.seed);
    params.scaling = scaling;
    let tr = prepare(train, &scaling);
    let va = prepare(validation, &scaling);

    let mut adams: Vec<Adam> = params.networks.iter().map(|n| Adam::new(n.weights.len())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..tr.len()).collect();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, CalibratorParams)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut step_sum = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &tr[i]).collect();
            for (k, (net, adam)) in params.networks.iter_mut().zip(&mut adams).enumerate() {
                let (mut g, loss, steps) = batch_gradient(net, cfg.layout.heads(k), &batch);
                if k == 0 {
                    step_sum += steps;
                }
                loss_sum += loss;
                if steps == 0 {
                    continue;
                }
                if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Diverged {
                        epoch,
                        detail: format!("non-finite loss or gradient in network {k} (loss {loss})"),
                    });
                }
                let inv = 1.0 / steps as f64;
                g.iter_mut().for_each(|v| *v *= inv);
                adam.update(&mut net.weights, &g, cfg);
            }
        }
        let epoch_loss = if step_sum == 0 { 0.0 } else { loss_sum / step_sum as f64 };
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("training loss {epoch_loss}"),
            });
        }
        report.train_loss.push(epoch_loss);
        let score = if va.is_empty() {
            mean_loss(&params, &tr)
        } else {
            let v = mean_loss(&params, &va);
            report.validation_loss.push(v);
            v
        };
        if !score.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("selection loss {score}"),
            });
        }
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, params.clone()));
            report.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                report.stopped_early = true;
                break;
            }
        }
    }
    let params = best.map(|(_, p)| p).unwrap_or(params);
    Ok(Trained { params, report })
}
