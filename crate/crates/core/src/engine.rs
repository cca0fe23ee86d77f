//! Step-wise match construction from a decision history.
//!
//! Each decision is accepted when its value (the raw confidence, or the
//! calibrated probability of being correct) reaches the threshold of the
//! target policy:
//!
//! | target | static | dynamic |
//! |--------|--------|---------|
//! | R      | 0      | 0       |
//! | P      | 1      | estimate of P(σ<sub>t-1</sub>) |
//! | F      | 0.5    | half the estimate of F(σ<sub>t-1</sub>) |
//!
//! A later decision on a pair already seen replaces the earlier one: the pair
//! leaves the running match, the threshold is computed over what remains, and
//! the pair re-enters only if accepted again.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calibrator::{encode_decision, DecisionModel, FeatureContext, PredictionTriple, SequenceState};
use crate::error::{Error, Result};
use crate::model::{DecisionHistory, DecisionRecord, Match, Pair};
use crate::theory::{expected_fmeasure_unchecked, MeasureKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Static,
    Dynamic,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(ThresholdMode::Static),
            "dynamic" => Ok(ThresholdMode::Dynamic),
            other => Err(Error::InvalidArgument(format!("unknown threshold mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetSpec {
    pub measure: MeasureKind,
    pub mode: ThresholdMode,
}

impl TargetSpec {
    pub const fn new(measure: MeasureKind, mode: ThresholdMode) -> Self {
        TargetSpec { measure, mode }
    }

    /// The five policies worth distinguishing; recall ignores the mode.
    pub const ALL: [TargetSpec; 5] = [
        TargetSpec::new(MeasureKind::Recall, ThresholdMode::Static),
        TargetSpec::new(MeasureKind::Precision, ThresholdMode::Static),
        TargetSpec::new(MeasureKind::Precision, ThresholdMode::Dynamic),
        TargetSpec::new(MeasureKind::FMeasure, ThresholdMode::Static),
        TargetSpec::new(MeasureKind::FMeasure, ThresholdMode::Dynamic),
    ];
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.measure, self.mode) {
            (MeasureKind::Recall, _) => write!(f, "R"),
            (m, ThresholdMode::Static) => write!(f, "{m}-static"),
            (m, ThresholdMode::Dynamic) => write!(f, "{m}-dynamic"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Unbiased,
    Calibrated,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unbiased" | "raw" => Ok(EstimatorKind::Unbiased),
            "calibrated" => Ok(EstimatorKind::Calibrated),
            other => Err(Error::InvalidArgument(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Source of decision values and measure estimates.
#[derive(Clone, Debug)]
pub enum Estimator {
    Unbiased,
    Calibrated {
        model: Arc<dyn DecisionModel>,
        context: Arc<FeatureContext>,
    },
}

impl Estimator {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            Estimator::Unbiased => EstimatorKind::Unbiased,
            Estimator::Calibrated { .. } => EstimatorKind::Calibrated,
        }
    }

    pub fn from_kind(
        kind: EstimatorKind,
        model: Option<Arc<dyn DecisionModel>>,
        context: Option<Arc<FeatureContext>>,
    ) -> Result<Self> {
        match kind {
            EstimatorKind::Unbiased => Ok(Estimator::Unbiased),
            EstimatorKind::Calibrated => Ok(Estimator::Calibrated {
                model: model.ok_or(Error::MissingCalibrator("a trained model"))?,
                context: context.ok_or(Error::MissingCalibrator("a feature context"))?,
            }),
        }
    }
}

/// Audit entry for one processed decision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub index: usize,
    pub pair: Pair,
    pub confidence_used: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub running_match_size: usize,
}

pub fn static_threshold(target: MeasureKind) -> f64 {
    match target {
        MeasureKind::Recall => 0.0,
        MeasureKind::Precision => 1.0,
        MeasureKind::FMeasure => 0.5,
    }
}

/// Incremental form of [`process_history`].
#[derive(Clone, Debug)]
pub struct RunningState {
    target: TargetSpec,
    estimator: Estimator,
    ref_size: usize,
    accepted: Match,
    last_timestamp: Option<f64>,
    steps: usize,
    model_state: SequenceState,
    last_prediction: Option<PredictionTriple>,
}

impl RunningState {
    pub fn new(target: TargetSpec, estimator: Estimator, ref_size: usize) -> Result<Self> {
        if ref_size < 1 {
            return Err(Error::InvalidArgument("reference size must be at least 1".into()));
        }
        let model_state = match &estimator {
            Estimator::Unbiased => SequenceState::default(),
            Estimator::Calibrated { model, .. } => model.start(),
        };
        Ok(RunningState {
            target,
            estimator,
            ref_size,
            accepted: Match::new(),
            last_timestamp: None,
            steps: 0,
            model_state,
            last_prediction: None,
        })
    }

    pub fn target(&self) -> TargetSpec {
        self.target
    }

    pub fn ref_size(&self) -> usize {
        self.ref_size
    }

    pub fn accepted(&self) -> &Match {
        &self.accepted
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.last_timestamp
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    /// Calibrator output for the latest decision, if calibrated.
    pub fn last_prediction(&self) -> Option<PredictionTriple> {
        self.last_prediction
    }

    /// Threshold the next decision will face, when it does not depend on
    /// that decision's own calibrated prediction.
    pub fn next_threshold(&self) -> Option<f64> {
        let dynamic = self.target.mode == ThresholdMode::Dynamic && self.target.measure != MeasureKind::Recall;
        match (&self.estimator, dynamic) {
            (Estimator::Calibrated { .. }, true) => None,
            _ => Some(self.threshold(None)),
        }
    }

    /// Expected precision and f-measure of the running match from its confidences.
    pub fn unbiased_estimates(&self) -> (f64, f64) {
        let size = self.accepted.len();
        let sum: f64 = self.accepted.iter().filter_map(|c| c.value).sum();
        let p = if size == 0 { 0.0 } else { sum / size as f64 };
        (p, expected_fmeasure_unchecked(sum, size, self.ref_size))
    }

    fn threshold(&self, estimate: Option<PredictionTriple>) -> f64 {
        let TargetSpec { measure, mode } = self.target;
        if mode == ThresholdMode::Static || measure == MeasureKind::Recall {
            return static_threshold(measure);
        }
        let (p, f) = match estimate {
            Some(e) => (e.p_hat, e.f_hat),
            None => self.unbiased_estimates(),
        };
        match measure {
            MeasureKind::Precision => p,
            MeasureKind::FMeasure => 0.5 * f,
            MeasureKind::Recall => 0.0,
        }
    }

    /// Validates and folds one decision into the running match.
    pub fn step(&mut self, record: &DecisionRecord) -> Result<StepVerdict> {
        let c = record.confidence;
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::ValueOutOfRange {
                row: record.pair.row,
                col: record.pair.col,
                value: c,
            });
        }
        if !record.timestamp.is_finite() || record.timestamp < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "record {}: timestamp {} must be finite and non-negative",
                self.steps, record.timestamp
            )));
        }
        if let Some(last) = self.last_timestamp {
            if record.timestamp <= last {
                return Err(Error::TimestampRegression {
                    last,
                    found: record.timestamp,
                });
            }
        }
        let prediction = match &self.estimator {
            Estimator::Unbiased => None,
            Estimator::Calibrated { model, context } => {
                let features = encode_decision(record, self.last_timestamp, context)
                    .map_err(|e| match e {
                        Error::PairOutOfBounds { pair, rows, cols, .. } => Error::PairOutOfBounds {
                            index: self.steps,
                            pair,
                            rows,
                            cols,
                        },
                        other => other,
                    })?;
                Some(model.predict(&mut self.model_state, &features))
            }
        };

        self.accepted.remove(record.pair);
        let threshold = self.threshold(prediction);
        let value = prediction.map_or(c, |p| p.pr_correct);
        let accepted = threshold <= value;
        if accepted {
            self.accepted.insert(record.pair, Some(c));
        }
        let verdict = StepVerdict {
            index: self.steps,
            pair: record.pair,
            confidence_used: value,
            threshold,
            accepted,
            running_match_size: self.accepted.len(),
        };
        self.steps += 1;
        self.last_timestamp = Some(record.timestamp);
        self.last_prediction = prediction;
        Ok(verdict)
    }
}

/// Walks a history in order and returns the accepted match with one verdict per record.
pub fn process_history(
    history: &DecisionHistory,
    target: TargetSpec,
    estimator: &Estimator,
    ref_size: usize,
) -> Result<(Match, Vec<StepVerdict>)> {
    let mut state = RunningState::new(target, estimator.clone(), ref_size)?;
    let verdicts = history
        .iter()
        .map(|r| state.step(r))
        .collect::<Result<Vec<_>>>()?;
    Ok((state.accepted, verdicts))
}
