//! Learned decision calibration: feature encoding, labels, the recurrent
//! network, training and a non-sequential baseline.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub mod baseline;
pub mod features;
pub mod gradcheck;
pub mod labels;
pub mod network;
pub mod train;

pub use baseline::{BaselineConfig, LinearBaseline};
pub use features::{
    build_consensus, encode_decision, encode_history, ConsensusMatrix, FeatureContext,
    FeatureScaling, FeatureVector,
};
pub use gradcheck::{analytic_gradient, gradient_check, gradient_check_with, sequence_loss};
pub use labels::{make_labels, LabelTriple};
pub use network::{HeadWeights, LstmState, Network, NetworkShape};
pub use train::{train, train_split, Sequence, TrainConfig, TrainReport, Trained};

use crate::error::{Error, Result};

/// Per-step model output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionTriple {
    pub pr_correct: f64,
    pub p_hat: f64,
    pub f_hat: f64,
}

/// Whether the three heads share one trunk or each get their own network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadLayout {
    #[default]
    Shared,
    Separate,
}

impl HeadLayout {
    pub fn network_count(self) -> usize {
        match self {
            HeadLayout::Shared => 1,
            HeadLayout::Separate => 3,
        }
    }

    /// Loss weights used when training network `k`.
    pub fn heads(self, k: usize) -> HeadWeights {
        match self {
            HeadLayout::Shared => HeadWeights::ALL,
            HeadLayout::Separate => HeadWeights {
                classifier: f64::from(u8::from(k == 0)),
                precision: f64::from(u8::from(k == 1)),
                fmeasure: f64::from(u8::from(k == 2)),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratorParams {
    pub layout: HeadLayout,
    pub networks: Vec<Network>,
    pub scaling: FeatureScaling,
}

/// Recurrent state of one sequence under some [`DecisionModel`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SequenceState {
    states: Vec<LstmState>,
}

/// Anything that maps a matcher's decisions, one at a time, to predictions.
pub trait DecisionModel: Send + Sync + fmt::Debug {
    fn start(&self) -> SequenceState;
    fn predict(&self, state: &mut SequenceState, features: &FeatureVector) -> PredictionTriple;

    fn predict_all(&self, features: &[FeatureVector]) -> Vec<PredictionTriple> {
        let mut state = self.start();
        features.iter().map(|f| self.predict(&mut state, f)).collect()
    }
}

impl CalibratorParams {
    pub fn init(shape: NetworkShape, layout: HeadLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CalibratorParams {
            layout,
            networks: (0..layout.network_count())
                .map(|_| Network::init(shape, &mut rng))
                .collect(),
            scaling: FeatureScaling::default(),
        }
    }

    pub fn zeros(shape: NetworkShape, layout: HeadLayout) -> Self {
        CalibratorParams {
            layout,
            networks: vec![Network::zeros(shape); layout.network_count()],
            scaling: FeatureScaling::default(),
        }
    }

    pub fn shape(&self) -> NetworkShape {
        self.networks.first().map(|n| n.shape).unwrap_or_default()
    }

    pub fn parameter_count(&self) -> usize {
        self.networks.iter().map(|n| n.weights.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.networks.len() != self.layout.network_count() {
            return Err(Error::InvalidArgument(format!(
                "{:?} layout needs {} networks, found {}",
                self.layout,
                self.layout.network_count(),
                self.networks.len()
            )));
        }
        for n in &self.networks {
            if n.shape.input != FeatureVector::WIDTH {
                return Err(Error::InvalidArgument(format!(
                    "network input width {} but features have {}",
                    n.shape.input,
                    FeatureVector::WIDTH
                )));
            }
            if n.shape != self.shape() {
                return Err(Error::InvalidArgument("networks disagree on shape".into()));
            }
            n.validate()?;
        }
        if !(self.scaling.delta_min.is_finite() && self.scaling.delta_max.is_finite()) {
            return Err(Error::InvalidArgument("feature scaling is not finite".into()));
        }
        Ok(())
    }

    fn combine(&self, per_net: impl Iterator<Item = PredictionTriple>) -> PredictionTriple {
        let outs: Vec<PredictionTriple> = per_net.collect();
        match self.layout {
            HeadLayout::Shared => outs[0],
            HeadLayout::Separate => PredictionTriple {
                pr_correct: outs[0].pr_correct,
                p_hat: outs[1].p_hat,
                f_hat: outs[2].f_hat,
            },
        }
    }
}

impl DecisionModel for CalibratorParams {
    fn start(&self) -> SequenceState {
        SequenceState {
            states: self.networks.iter().map(Network::start).collect(),
        }
    }

    fn predict(&self, state: &mut SequenceState, features: &FeatureVector) -> PredictionTriple {
        let x = self.scaling.apply(features);
        self.combine(
            self.networks
                .iter()
                .zip(state.states.iter_mut())
                .map(|(n, s)| n.step(&x, s)),
        )
    }
}

/// Runs the calibrator over a whole sequence.
pub fn lstm_forward(
    params: &CalibratorParams,
    features: &[FeatureVector],
) -> Result<Vec<PredictionTriple>> {
    params.validate()?;
    Ok(params.predict_all(features))
}
