//! Cross-validated comparison of raw confidences, the non-sequential
//! baseline and the recurrent calibrator on a simulated cohort.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{finalize, partial_matrix, rb_select, sweep_rb_threshold, unit_grid, BoostCase, RbConfig, RbVariant};
use crate::calibrator::{
    build_consensus, encode_history, make_labels, train_split, BaselineConfig, DecisionModel, FeatureContext,
    LinearBaseline, Sequence, TrainConfig,
};
use crate::engine::{process_history, Estimator, TargetSpec};
use crate::error::{Error, Result};
use crate::metrics::{kendall_tau, pearson, rmse_mae};
use crate::model::{DecisionHistory, Match, Quality};
use crate::sim::Cohort;
use crate::theory::expected_fmeasure_unchecked;

/// Seeded partition of `0..n` into `k` folds of near-equal size.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} items into {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Raw,
    Baseline,
    Pipeline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Raw, Method::Baseline, Method::Pipeline];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Raw => "raw",
            Method::Baseline => "baseline",
            Method::Pipeline => "pipeline",
        })
    }
}

/// Agreement between estimates and truths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub pearson: Option<f64>,
    pub kendall: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
}

impl Agreement {
    pub fn of(estimates: &[f64], truths: &[f64]) -> Result<Self> {
        let (rmse, mae) = rmse_mae(estimates, truths)?;
        Ok(Agreement {
            pearson: pearson(estimates, truths)?,
            kendall: kendall_tau(estimates, truths)?,
            rmse,
            mae,
        })
    }
}

/// Per-decision estimates of correctness and of prefix quality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub method: Method,
    pub decision: Agreement,
    pub precision: Agreement,
    pub fmeasure: Agreement,
}

/// Mean match quality over test matchers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub method: Method,
    pub target: TargetSpec,
    pub hits: f64,
    pub size: f64,
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostSummary {
    pub variant: RbVariant,
    pub threshold: f64,
    pub mean_recall_hp: f64,
    pub mean_recall_final: f64,
    pub mean_f_hp: f64,
    pub mean_f_final: f64,
    /// Matchers whose recall dropped after boosting; should be empty.
    pub recall_drops: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub calibration: Vec<CalibrationRow>,
    pub quality: Vec<QualityRow>,
    pub boost: BoostSummary,
    pub best_epoch: Option<usize>,
}

impl FoldReport {
    pub fn calibration(&self, m: Method) -> &CalibrationRow {
        self.calibration.iter().find(|r| r.method == m).expect("every method is reported")
    }

    pub fn quality(&self, m: Method, t: TargetSpec) -> &QualityRow {
        self.quality
            .iter()
            .find(|r| r.method == m && r.target == t)
            .expect("every method and target is reported")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    /// Share of non-test matchers held out for model selection.
    pub validation_share: f64,
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
    pub rb_variant: RbVariant,
    pub rb_grid: Vec<f64>,
    /// Target whose matches recall boosting extends.
    pub boost_target: TargetSpec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            seed: 0,
            validation_share: 0.25,
            train: TrainConfig::default(),
            baseline: BaselineConfig::default(),
            rb_variant: RbVariant::Uniform,
            rb_grid: unit_grid(0.05).expect("valid step"),
            boost_target: TargetSpec::new(crate::theory::MeasureKind::FMeasure, crate::engine::ThresholdMode::Dynamic),
        }
    }
}

fn sequences(histories: &[&DecisionHistory], cohort: &Cohort, ctx: &FeatureContext) -> Result<Vec<Sequence>> {
    histories
        .iter()
        .map(|h| Sequence::from_history(h, &cohort.task.reference, ctx))
        .collect()
}

/// Raw estimates: the confidence itself, and the expectations of the prefix
/// of distinct earlier pairs under the confidences.
fn raw_estimates(history: &DecisionHistory, ref_size: usize) -> Vec<(f64, f64, f64)> {
    let mut prefix = Match::new();
    history
        .iter()
        .map(|r| {
            let sum: f64 = prefix.iter().filter_map(|c| c.value).sum();
            let size = prefix.len();
            let p = if size == 0 { 0.0 } else { sum / size as f64 };
            let out = (r.confidence, p, expected_fmeasure_unchecked(sum, size, ref_size));
            prefix.insert(r.pair, Some(r.confidence));
            out
        })
        .collect()
}

struct Series {
    est: [Vec<f64>; 3],
    truth: [Vec<f64>; 3],
}

impl Series {
    fn new() -> Self {
        Series {
            est: Default::default(),
            truth: Default::default(),
        }
    }

    fn push(&mut self, est: [f64; 3], truth: [f64; 3]) {
        for k in 0..3 {
            self.est[k].push(est[k]);
            self.truth[k].push(truth[k]);
        }
    }

    fn row(&self, method: Method) -> Result<CalibrationRow> {
        Ok(CalibrationRow {
            method,
            decision: Agreement::of(&self.est[0], &self.truth[0])?,
            precision: Agreement::of(&self.est[1], &self.truth[1])?,
            fmeasure: Agreement::of(&self.est[2], &self.truth[2])?,
        })
    }
}

fn mean_quality(qs: &[Quality], method: Method, target: TargetSpec) -> QualityRow {
    let n = qs.len().max(1) as f64;
    let avg = |f: &dyn Fn(&Quality) -> f64| qs.iter().map(f).sum::<f64>() / n;
    QualityRow {
        method,
        target,
        hits: avg(&|q| q.hits as f64),
        size: avg(&|q| q.size as f64),
        precision: avg(&|q| q.precision),
        recall: avg(&|q| q.recall),
        fmeasure: avg(&|q| q.fmeasure),
    }
}

/// Trained models for one fold.
pub struct FoldModels {
    pub context: Arc<FeatureContext>,
    pub pipeline: Arc<dyn DecisionModel>,
    pub baseline: Arc<dyn DecisionModel>,
    pub best_epoch: Option<usize>,
}

/// Fits both learners on `train`, selecting the recurrent model on `validation`.
pub fn fit_fold(cohort: &Cohort, train: &[usize], validation: &[usize], cfg: &EvalConfig) -> Result<FoldModels> {
    let task = &cohort.task;
    let seen: Vec<DecisionHistory> = train
        .iter()
        .chain(validation)
        .map(|&i| cohort.matchers[i].history.clone())
        .collect();
    let consensus = build_consensus(&seen, task.rows(), task.cols());
    let context = FeatureContext::new(consensus, task.algorithmic.clone())?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| &cohort.matchers[i].history).collect::<Vec<_>>();
    let tr = sequences(&pick(train), cohort, &context)?;
    let va = sequences(&pick(validation), cohort, &context)?;
    let trained = train_split(&tr, &va, &cfg.train)?;
    let baseline = LinearBaseline::fit(&tr, &cfg.baseline)?;
    Ok(FoldModels {
        context: Arc::new(context),
        pipeline: Arc::new(trained.params),
        baseline: Arc::new(baseline),
        best_epoch: trained.report.best_epoch,
    })
}

fn estimator(models: &FoldModels, m: Method) -> Estimator {
    match m {
        Method::Raw => Estimator::Unbiased,
        Method::Baseline => Estimator::Calibrated {
            model: models.baseline.clone(),
            context: models.context.clone(),
        },
        Method::Pipeline => Estimator::Calibrated {
            model: models.pipeline.clone(),
            context: models.context.clone(),
        },
    }
}

/// Scores fitted models on the test matchers of one fold.
pub fn score_fold(
    cohort: &Cohort,
    fold: usize,
    split: (&[usize], &[usize], &[usize]),
    models: &FoldModels,
    cfg: &EvalConfig,
) -> Result<FoldReport> {
    let (train, validation, test) = split;
    let task = &cohort.task;
    let reference = &task.reference;
    let ref_size = reference.known_size().max(1);

    let mut calibration = Vec::new();
    for m in Method::ALL {
        let mut s = Series::new();
        for &i in test {
            let h = &cohort.matchers[i].history;
            let labels = make_labels(h, reference);
            let ests: Vec<[f64; 3]> = match m {
                Method::Raw => raw_estimates(h, ref_size).into_iter().map(|(a, b, c)| [a, b, c]).collect(),
                Method::Baseline | Method::Pipeline => {
                    let model = if m == Method::Baseline { &models.baseline } else { &models.pipeline };
                    model
                        .predict_all(&encode_history(h, &models.context)?)
                        .into_iter()
                        .map(|p| [p.pr_correct, p.p_hat, p.f_hat])
                        .collect()
                }
            };
            for (e, l) in ests.into_iter().zip(labels) {
                s.push(e, [f64::from(l.correct), l.p_prefix, l.f_prefix]);
            }
        }
        calibration.push(s.row(m)?);
    }

    let mut quality = Vec::new();
    for m in Method::ALL {
        let est = estimator(models, m);
        for t in TargetSpec::ALL {
            let qs = test
                .par_iter()
                .map(|&i| {
                    process_history(&cohort.matchers[i].history, t, &est, ref_size)
                        .map(|(sigma, _)| Quality::of(&sigma, reference))
                })
                .collect::<Result<Vec<_>>>()?;
            quality.push(mean_quality(&qs, m, t));
        }
    }

    let pipeline = estimator(models, Method::Pipeline);
    let case = |i: usize| -> Result<BoostCase> {
        let h = &cohort.matchers[i].history;
        let (sigma_hp, _) = process_history(h, cfg.boost_target, &pipeline, ref_size)?;
        Ok(BoostCase {
            sigma_hp,
            partial: partial_matrix(&task.algorithmic, h),
            reference: reference.clone(),
        })
    };
    let train_cases = train.par_iter().map(|&i| case(i)).collect::<Result<Vec<_>>>()?;
    let threshold = sweep_rb_threshold(&train_cases, cfg.rb_variant, &cfg.rb_grid)?;
    let rb = RbConfig::new(cfg.rb_variant, threshold);
    let (mut r_hp, mut r_fin, mut f_hp, mut f_fin) = (0.0, 0.0, 0.0, 0.0);
    let mut drops = Vec::new();
    for &i in test {
        let c = case(i)?;
        let boosted = finalize(&c.sigma_hp, &rb_select(&c.partial, &rb, &c.sigma_hp)?)?;
        let (q_hp, q_fin) = (Quality::of(&c.sigma_hp, reference), Quality::of(&boosted, reference));
        if q_fin.recall < q_hp.recall {
            drops.push(cohort.matchers[i].id.clone());
        }
        r_hp += q_hp.recall;
        r_fin += q_fin.recall;
        f_hp += q_hp.fmeasure;
        f_fin += q_fin.fmeasure;
    }
    let n = test.len().max(1) as f64;
    Ok(FoldReport {
        fold,
        train: train.len(),
        validation: validation.len(),
        test: test.len(),
        calibration,
        quality,
        boost: BoostSummary {
            variant: cfg.rb_variant,
            threshold,
            mean_recall_hp: r_hp / n,
            mean_recall_final: r_fin / n,
            mean_f_hp: f_hp / n,
            mean_f_final: f_fin / n,
            recall_drops: drops,
        },
        best_epoch: models.best_epoch,
    })
}

/// Splits the non-test matchers of each fold into training and validation.
pub fn fold_splits(n: usize, cfg: &EvalConfig) -> Result<Vec<(Vec<usize>, Vec<usize>, Vec<usize>)>> {
    if !(0.0..1.0).contains(&cfg.validation_share) {
        return Err(Error::InvalidArgument("validation share must lie in [0,1)".into()));
    }
    let folds = kfold(n, cfg.folds, cfg.seed)?;
    Ok((0..folds.len())
        .map(|k| {
            let test = folds[k].clone();
            let mut rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            rest.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64 + 1)));
            let held = (rest.len() as f64 * cfg.validation_share).round() as usize;
            let validation = rest.split_off(rest.len() - held);
            rest.sort_unstable();
            let mut validation = validation;
            validation.sort_unstable();
            (rest, validation, test)
        })
        .collect())
}

/// Full cross-validated evaluation.
pub fn evaluate_cohort(cohort: &Cohort, cfg: &EvalConfig) -> Result<Vec<FoldReport>> {
    fold_splits(cohort.matchers.len(), cfg)?
        .iter()
        .enumerate()
        .map(|(k, (train, val, test))| {
            let models = fit_fold(cohort, train, val, cfg)?;
            score_fold(cohort, k, (train, val, test), &models, cfg)
        })
        .collect()
}
