//! Python bindings: decision histories, threshold policies, expectation
//! formulas, recall boosting, quality metrics and simulated cohorts.
//!
//! Pairs cross the boundary as `(row, col)` tuples and decisions as
//! `(row, col, confidence, timestamp)` tuples, all 0-based.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use procmatch::boost::{best_point, finalize, partial_matrix, rb_select, sweep_curve, BoostCase, RbConfig, RbVariant};
use procmatch::calibrator::DecisionModel;
use procmatch::engine::{process_history, Estimator, RunningState, StepVerdict, TargetSpec, ThresholdMode};
use procmatch::io::{load_calibrator, load_task_bundle, save_task_bundle, BundleMeta, TaskBundle};
use procmatch::matchers::SimilarityMatrix;
use procmatch::model::{DecisionHistory, DecisionRecord, Match, Pair, ReferenceMatch};
use procmatch::session::task_context;
use procmatch::sim::{simulate_cohort, synthetic_task, ProfileDistribution, TaskShape};
use procmatch::theory::{brute_force_expectations, ConfidenceMatch, MeasureKind};
use procmatch::{metrics, Error};
use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;

type Decision = (usize, usize, f64, f64);

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn target(measure: &str, mode: &str) -> PyResult<TargetSpec> {
    Ok(TargetSpec::new(parse::<MeasureKind>(measure)?, parse::<ThresholdMode>(mode)?))
}

fn history(decisions: &[Decision]) -> DecisionHistory {
    DecisionHistory::new(decisions.iter().map(|&(r, c, conf, t)| DecisionRecord::new(r, c, conf, t)).collect())
}

fn pairs(sigma: &Match) -> Vec<(usize, usize)> {
    sigma.pairs().map(|p| (p.row, p.col)).collect()
}

fn to_match(pairs: &[(usize, usize)]) -> Match {
    let mut sigma = Match::new();
    for &(r, c) in pairs {
        sigma.insert(Pair::new(r, c), None);
    }
    sigma
}

fn reference(pairs: &[(usize, usize)]) -> ReferenceMatch {
    ReferenceMatch::new(pairs.iter().map(|&(r, c)| Pair::new(r, c)))
}

/// Outcome of one processed decision.
#[pyclass(frozen, get_all, skip_from_py_object, module = "procmatch_py")]
#[derive(Clone)]
pub struct Verdict {
    pub index: usize,
    pub pair: (usize, usize),
    /// Value compared against the threshold: raw or calibrated.
    pub confidence: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub running_size: usize,
}

impl From<StepVerdict> for Verdict {
    fn from(v: StepVerdict) -> Self {
        Verdict {
            index: v.index,
            pair: (v.pair.row, v.pair.col),
            confidence: v.confidence_used,
            threshold: v.threshold,
            accepted: v.accepted,
            running_size: v.running_match_size,
        }
    }
}

#[pymethods]
impl Verdict {
    fn __repr__(&self) -> String {
        format!(
            "Verdict(index={}, pair={:?}, confidence={}, threshold={}, accepted={})",
            self.index, self.pair, self.confidence, self.threshold, self.accepted
        )
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "procmatch_py")]
#[derive(Clone)]
pub struct Quality {
    pub hits: usize,
    pub size: usize,
    pub reference_size: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

impl From<procmatch::model::Quality> for Quality {
    fn from(q: procmatch::model::Quality) -> Self {
        Quality {
            hits: q.hits,
            size: q.size,
            reference_size: q.reference_size,
            precision: q.precision,
            recall: q.recall,
            fmeasure: q.fmeasure,
        }
    }
}

#[pymethods]
impl Quality {
    fn __repr__(&self) -> String {
        format!("Quality(P={:.4}, R={:.4}, F={:.4})", self.precision, self.recall, self.fmeasure)
    }
}

/// A replayed history: the accepted pairs and one verdict per decision.
#[pyclass(frozen, get_all, module = "procmatch_py")]
pub struct Replay {
    pub accepted: Vec<(usize, usize)>,
    pub verdicts: Vec<Verdict>,
}

fn replay_with(h: &DecisionHistory, spec: TargetSpec, estimator: &Estimator, ref_size: usize) -> PyResult<Replay> {
    let (sigma, verdicts) = process_history(h, spec, estimator, ref_size).map_err(err)?;
    Ok(Replay { accepted: pairs(&sigma), verdicts: verdicts.into_iter().map(Verdict::from).collect() })
}

/// Replays decisions under a target measure and threshold mode with raw confidences.
#[pyfunction]
#[pyo3(signature = (decisions, ref_size, measure = "f", mode = "dynamic"))]
fn replay(decisions: Vec<Decision>, ref_size: usize, measure: &str, mode: &str) -> PyResult<Replay> {
    replay_with(&history(&decisions), target(measure, mode)?, &Estimator::Unbiased, ref_size)
}

/// Incremental processing, one decision at a time.
#[pyclass(module = "procmatch_py")]
pub struct Session {
    state: RunningState,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (ref_size, measure = "f", mode = "dynamic"))]
    fn new(ref_size: usize, measure: &str, mode: &str) -> PyResult<Self> {
        let state = RunningState::new(target(measure, mode)?, Estimator::Unbiased, ref_size).map_err(err)?;
        Ok(Session { state })
    }

    fn step(&mut self, row: usize, col: usize, confidence: f64, timestamp: f64) -> PyResult<Verdict> {
        let record = DecisionRecord::new(row, col, confidence, timestamp);
        self.state.step(&record).map(Verdict::from).map_err(err)
    }

    /// Threshold the next decision will face.
    #[getter]
    fn next_threshold(&self) -> Option<f64> {
        self.state.next_threshold()
    }

    #[getter]
    fn accepted(&self) -> Vec<(usize, usize)> {
        pairs(self.state.accepted())
    }

    #[getter]
    fn steps(&self) -> usize {
        self.state.steps()
    }
}

#[pyfunction]
fn quality(accepted: Vec<(usize, usize)>, reference_pairs: Vec<(usize, usize)>) -> Quality {
    procmatch::model::Quality::of(&to_match(&accepted), &reference(&reference_pairs)).into()
}

#[pyfunction]
fn expected_precision(confidences: Vec<f64>) -> PyResult<f64> {
    let cm = ConfidenceMatch::from_confidences(&confidences).map_err(err)?;
    Ok(procmatch::theory::expected_precision(&cm))
}

#[pyfunction]
fn expected_fmeasure(confidences: Vec<f64>, ref_size: usize) -> PyResult<f64> {
    let cm = ConfidenceMatch::from_confidences(&confidences).map_err(err)?;
    procmatch::theory::expected_fmeasure(&cm, ref_size).map_err(err)
}

/// Expected (P, F) by enumerating every outcome; small matches only.
#[pyfunction]
fn enumerate_expectations(confidences: Vec<f64>, ref_size: usize) -> PyResult<(f64, f64)> {
    let cm = ConfidenceMatch::from_confidences(&confidences).map_err(err)?;
    brute_force_expectations(&cm, ref_size).map_err(err)
}

#[pyfunction]
fn pearson(estimates: Vec<f64>, truths: Vec<f64>) -> PyResult<Option<f64>> {
    metrics::pearson(&estimates, &truths).map_err(err)
}

#[pyfunction]
fn kendall_tau(estimates: Vec<f64>, truths: Vec<f64>) -> PyResult<Option<f64>> {
    metrics::kendall_tau(&estimates, &truths).map_err(err)
}

/// Returns `(rmse, mae)`.
#[pyfunction]
fn rmse_mae(estimates: Vec<f64>, truths: Vec<f64>) -> PyResult<(f64, f64)> {
    metrics::rmse_mae(&estimates, &truths).map_err(err)
}

/// Adds algorithmic suggestions on pairs the matcher never touched to the
/// accepted pairs.
#[pyfunction]
#[pyo3(signature = (matrix, decisions, accepted, variant = "uniform", param = 0.9))]
fn boost(
    matrix: Vec<Vec<f64>>,
    decisions: Vec<Decision>,
    accepted: Vec<(usize, usize)>,
    variant: &str,
    param: f64,
) -> PyResult<Vec<(usize, usize)>> {
    let matrix = SimilarityMatrix::from_rows(&matrix).map_err(err)?;
    let partial = partial_matrix(&matrix, &history(&decisions));
    let sigma_hp = to_match(&accepted);
    let rb = rb_select(&partial, &RbConfig::new(parse::<RbVariant>(variant)?, param), &sigma_hp).map_err(err)?;
    Ok(pairs(&finalize(&sigma_hp, &rb).map_err(err)?))
}

/// A matching task with its reference, algorithmic matrix and recorded histories.
#[pyclass(module = "procmatch_py")]
pub struct Task {
    bundle: TaskBundle,
}

impl Task {
    fn estimator(&self, model: Option<PathBuf>) -> PyResult<Estimator> {
        match model {
            None => Ok(Estimator::Unbiased),
            Some(path) => {
                let model: Arc<dyn DecisionModel> = Arc::new(load_calibrator(&path).map_err(err)?);
                let context = Arc::new(task_context(&self.bundle).map_err(err)?);
                Ok(Estimator::Calibrated { model, context })
            }
        }
    }

    fn history(&self, name: &str) -> PyResult<&DecisionHistory> {
        self.bundle.histories.get(name).ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }
}

#[pymethods]
impl Task {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Task { bundle: load_task_bundle(&dir).map_err(err)? })
    }

    /// Synthetic task with `count` simulated matchers drawn from the
    /// `biased` or `unbiased` profile distribution.
    #[staticmethod]
    #[pyo3(signature = (count, seed = 0, profiles = "biased", task_seed = None))]
    fn simulate(count: usize, seed: u64, profiles: &str, task_seed: Option<u64>) -> PyResult<Self> {
        let dist: ProfileDistribution = parse(profiles)?;
        let task = synthetic_task(TaskShape::default(), task_seed.unwrap_or(seed)).map_err(err)?;
        let cohort = simulate_cohort(count, &dist, &task, seed).map_err(err)?;
        let histories: BTreeMap<String, DecisionHistory> =
            cohort.matchers.into_iter().map(|m| (m.id, m.history)).collect();
        Ok(Task {
            bundle: TaskBundle {
                meta: BundleMeta { name: "simulated".into(), version: "1".into(), ref_size: None },
                schema_a: task.schema_a,
                schema_b: task.schema_b,
                reference: Some(task.reference),
                algorithmic: Some(task.algorithmic),
                histories,
            },
        })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        save_task_bundle(&dir, &self.bundle).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.bundle.meta.name.clone()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.bundle.rows(), self.bundle.cols())
    }

    #[getter]
    fn ref_size(&self) -> usize {
        self.bundle.ref_size()
    }

    #[getter]
    fn reference(&self) -> Option<Vec<(usize, usize)>> {
        self.bundle.reference.as_ref().map(|r| r.pairs().map(|p| (p.row, p.col)).collect())
    }

    /// Algorithmic similarity matrix as a list of rows.
    #[getter]
    fn matrix(&self) -> Option<Vec<Vec<f64>>> {
        self.bundle
            .algorithmic
            .as_ref()
            .map(|m| m.values().chunks(m.cols().max(1)).map(<[f64]>::to_vec).collect())
    }

    #[getter]
    fn history_names(&self) -> Vec<String> {
        self.bundle.histories.keys().cloned().collect()
    }

    fn decisions(&self, name: &str) -> PyResult<Vec<Decision>> {
        Ok(self
            .history(name)?
            .iter()
            .map(|r| (r.pair.row, r.pair.col, r.confidence, r.timestamp))
            .collect())
    }

    /// Replays a recorded history; a calibrator artifact switches to calibrated values.
    #[pyo3(signature = (name, measure = "f", mode = "dynamic", model = None))]
    fn replay(&self, name: &str, measure: &str, mode: &str, model: Option<PathBuf>) -> PyResult<Replay> {
        let estimator = self.estimator(model)?;
        replay_with(self.history(name)?, target(measure, mode)?, &estimator, self.bundle.ref_size())
    }

    /// Mean boosted F over every history for each grid value, and the best point.
    #[pyo3(signature = (grid, variant = "uniform", measure = "f", mode = "dynamic", model = None))]
    #[allow(clippy::type_complexity)]
    fn sweep(
        &self,
        grid: Vec<f64>,
        variant: &str,
        measure: &str,
        mode: &str,
        model: Option<PathBuf>,
    ) -> PyResult<(Vec<(f64, f64)>, Option<(f64, f64)>)> {
        let reference = self.bundle.reference.clone().ok_or_else(|| PyValueError::new_err("task has no reference"))?;
        let matrix = self.bundle.algorithmic.as_ref().ok_or_else(|| PyValueError::new_err("task has no matrix"))?;
        let estimator = self.estimator(model)?;
        let spec = target(measure, mode)?;
        let cases = self
            .bundle
            .histories
            .values()
            .map(|h| {
                Ok(BoostCase {
                    sigma_hp: process_history(h, spec, &estimator, self.bundle.ref_size()).map_err(err)?.0,
                    partial: partial_matrix(matrix, h),
                    reference: reference.clone(),
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let curve = sweep_curve(&cases, parse(variant)?, &grid).map_err(err)?;
        let best = best_point(&curve);
        Ok((curve, best))
    }

    fn __len__(&self) -> usize {
        self.bundle.histories.len()
    }

    fn __repr__(&self) -> String {
        let (rows, cols) = self.shape();
        format!("Task({:?}, {rows}x{cols}, {} histories)", self.bundle.meta.name, self.bundle.histories.len())
    }
}

#[pymodule]
fn procmatch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Verdict>()?;
    m.add_class::<Quality>()?;
    m.add_class::<Replay>()?;
    m.add_class::<Session>()?;
    m.add_class::<Task>()?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(quality, m)?)?;
    m.add_function(wrap_pyfunction!(expected_precision, m)?)?;
    m.add_function(wrap_pyfunction!(expected_fmeasure, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_expectations, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(rmse_mae, m)?)?;
    m.add_function(wrap_pyfunction!(boost, m)?)?;
    Ok(())
}
