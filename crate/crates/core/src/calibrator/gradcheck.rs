use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::Sequence;
use super::CalibratorParams;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Share of weights compared.
pub const FRACTION: f64 = 0.01;
/// Minimum number of weights compared on tiny networks.
pub const MIN_CHECKED: usize = 20;
/// Gradients below this magnitude are compared in absolute terms. Rounding
/// in a central difference leaves about `1e-16 * loss / STEP` of noise, so a
/// smaller floor would measure the noise rather than the gradient.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

fn inputs(params: &CalibratorParams, sample: &Sequence) -> Vec<[f64; 4]> {
    sample.features.iter().map(|f| params.scaling.apply(f)).collect()
}

/// Mean per-step loss summed over networks.
pub fn sequence_loss(params: &CalibratorParams, sample: &Sequence) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let xs = inputs(params, sample);
    let total: f64 = params
        .networks
        .iter()
        .enumerate()
        .map(|(k, n)| n.sequence_loss(&xs, &sample.labels, params.layout.heads(k)))
        .sum();
    total / sample.len() as f64
}

/// Back-propagated gradient of [`sequence_loss`], one vector per network.
pub fn analytic_gradient(params: &CalibratorParams, sample: &Sequence) -> Vec<Vec<f64>> {
    let xs = inputs(params, sample);
    let scale = if sample.is_empty() { 0.0 } else { 1.0 / sample.len() as f64 };
    params
        .networks
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let mut g = vec![0.0; n.weights.len()];
            let caches = n.forward_cached(&xs);
            n.backward(&caches, &sample.labels, params.layout.heads(k), scale, &mut g);
            g
        })
        .collect()
}

pub fn gradient_check(params: &CalibratorParams, sample: &Sequence) -> f64 {
    gradient_check_with(params, sample, 0, analytic_gradient)
}

/// Maximum relative error between `grad_fn` and central differences over a
/// seeded random subset of weights.
pub fn gradient_check_with<G>(params: &CalibratorParams, sample: &Sequence, seed: u64, grad_fn: G) -> f64
where
    G: Fn(&CalibratorParams, &Sequence) -> Vec<Vec<f64>>,
{
    let analytic = grad_fn(params, sample);
    let total = params.parameter_count();
    if total == 0 {
        return 0.0;
    }
    let wanted = ((total as f64 * FRACTION).ceil() as usize).max(MIN_CHECKED).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for flat in sample_indices(&mut rng, total, wanted) {
        let (k, j) = locate(params, flat);
        let w = params.networks[k].weights[j];
        probe.networks[k].weights[j] = w + STEP;
        let up = sequence_loss(&probe, sample);
        probe.networks[k].weights[j] = w - STEP;
        let down = sequence_loss(&probe, sample);
        probe.networks[k].weights[j] = w;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic.get(k).and_then(|g| g.get(j)).copied().unwrap_or(f64::NAN);
        let denom = a.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
        let err = (a - numeric).abs() / denom;
        worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
    }
    worst
}

fn locate(params: &CalibratorParams, mut flat: usize) -> (usize, usize) {
    for (k, n) in params.networks.iter().enumerate() {
        if flat < n.weights.len() {
            return (k, flat);
        }
        flat -= n.weights.len();
    }
    unreachable!("index beyond parameter count")
}
