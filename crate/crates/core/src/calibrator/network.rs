//! A single-layer LSTM over decision encodings, a dense tanh layer, and three
//! heads: a two-way softmax for correctness and two sigmoid regressors for the
//! prefix precision and f-measure. Parameters live in one flat vector so the
//! optimizer and the finite-difference checker can treat them uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::labels::LabelTriple;
use super::PredictionTriple;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub input: usize,
    pub hidden: usize,
    pub dense: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            input: 4,
            hidden: 64,
            dense: 128,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Offsets {
    pub wx: usize,
    pub wh: usize,
    pub b: usize,
    pub w1: usize,
    pub b1: usize,
    pub wc: usize,
    pub bc: usize,
    pub wp: usize,
    pub bp: usize,
    pub wf: usize,
    pub bf: usize,
    pub total: usize,
}

impl NetworkShape {
    pub(crate) fn offsets(&self) -> Offsets {
        let (i, h, d) = (self.input, self.hidden, self.dense);
        let wx = 0;
        let wh = wx + 4 * h * i;
        let b = wh + 4 * h * h;
        let w1 = b + 4 * h;
        let b1 = w1 + d * h;
        let wc = b1 + d;
        let bc = wc + 2 * d;
        let wp = bc + 2;
        let bp = wp + d;
        let wf = bp + 1;
        let bf = wf + d;
        Offsets {
            wx,
            wh,
            b,
            w1,
            b1,
            wc,
            bc,
            wp,
            bp,
            wf,
            bf,
            total: bf + 1,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.offsets().total
    }
}

/// Weights are stored row-major in this order: input weights `4h x i`,
/// recurrent weights `4h x h`, gate biases `4h` (gate blocks `[i, f, g, o]`),
/// dense `d x h` and `d`, classifier `2 x d` and `2`, precision head `d` and
/// `1`, f-measure head `d` and `1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub shape: NetworkShape,
    pub weights: Vec<f64>,
}

/// Recurrent state carried between decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates laid out as `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    z: Vec<f64>,
    u: Vec<f64>,
    probs: [f64; 2],
    p_hat: f64,
    f_hat: f64,
}

impl StepCache {
    pub(crate) fn prediction(&self) -> PredictionTriple {
        PredictionTriple {
            pr_correct: self.probs[1],
            p_hat: self.p_hat,
            f_hat: self.f_hat,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gemv_add(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn gemv_t_add(out: &mut [f64], w: &[f64], dy: &[f64]) {
    let cols = out.len();
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * d;
        }
    }
}

fn outer_add(g: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (o, a) in row.iter_mut().zip(x) {
            *o += d * a;
        }
    }
}

/// Per-head multipliers on the summed loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadWeights {
    pub classifier: f64,
    pub precision: f64,
    pub fmeasure: f64,
}

impl HeadWeights {
    pub const ALL: HeadWeights = HeadWeights {
        classifier: 1.0,
        precision: 1.0,
        fmeasure: 1.0,
    };
}

impl Network {
    pub fn zeros(shape: NetworkShape) -> Self {
        Network {
            shape,
            weights: vec![0.0; shape.parameter_count()],
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases except the forget gate at +1.
    pub fn init<R: Rng>(shape: NetworkShape, rng: &mut R) -> Self {
        let mut net = Network::zeros(shape);
        let o = shape.offsets();
        let h = shape.hidden;
        let fill = |w: &mut [f64], bound: f64, rng: &mut R| {
            for v in w {
                *v = rng.random_range(-bound..bound);
            }
        };
        let lstm_bound = 1.0 / (h as f64).sqrt();
        let dense_bound = 1.0 / (shape.dense as f64).sqrt();
        fill(&mut net.weights[o.wx..o.b], lstm_bound, rng);
        fill(&mut net.weights[o.w1..o.b1], lstm_bound, rng);
        fill(&mut net.weights[o.wc..o.bc], dense_bound, rng);
        fill(&mut net.weights[o.wp..o.bp], dense_bound, rng);
        fill(&mut net.weights[o.wf..o.bf], dense_bound, rng);
        for v in &mut net.weights[o.b + h..o.b + 2 * h] {
            *v = 1.0;
        }
        net
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.shape.parameter_count() {
            return Err(Error::InvalidArgument(format!(
                "network holds {} weights, shape needs {}",
                self.weights.len(),
                self.shape.parameter_count()
            )));
        }
        if let Some(k) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {k} is not finite")));
        }
        Ok(())
    }

    pub fn start(&self) -> LstmState {
        LstmState {
            hidden: vec![0.0; self.shape.hidden],
            cell: vec![0.0; self.shape.hidden],
        }
    }

    pub(crate) fn step_cached(&self, x: &[f64], state: &mut LstmState) -> StepCache {
        let NetworkShape { hidden: h, dense: d, .. } = self.shape;
        let o = self.shape.offsets();
        let w = &self.weights;

        let mut a = w[o.b..o.b + 4 * h].to_vec();
        gemv_add(&mut a, &w[o.wx..o.wh], x);
        gemv_add(&mut a, &w[o.wh..o.b], &state.hidden);
        let mut gates = vec![0.0; 4 * h];
        for k in 0..h {
            gates[k] = sigmoid(a[k]);
            gates[h + k] = sigmoid(a[h + k]);
            gates[2 * h + k] = a[2 * h + k].tanh();
            gates[3 * h + k] = sigmoid(a[3 * h + k]);
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hid = vec![0.0; h];
        for k in 0..h {
            c[k] = gates[h + k] * state.cell[k] + gates[k] * gates[2 * h + k];
            tanh_c[k] = c[k].tanh();
            hid[k] = gates[3 * h + k] * tanh_c[k];
        }
        let z: Vec<f64> = hid.iter().map(|v| v.tanh()).collect();

        let mut u = w[o.b1..o.b1 + d].to_vec();
        gemv_add(&mut u, &w[o.w1..o.b1], &z);
        for v in &mut u {
            *v = v.tanh();
        }

        let mut logits = [w[o.bc], w[o.bc + 1]];
        gemv_add(&mut logits, &w[o.wc..o.bc], &u);
        let mut lp = [w[o.bp]];
        gemv_add(&mut lp, &w[o.wp..o.bp], &u);
        let mut lf = [w[o.bf]];
        gemv_add(&mut lf, &w[o.wf..o.bf], &u);

        let m = logits[0].max(logits[1]);
        let e0 = (logits[0] - m).exp();
        let e1 = (logits[1] - m).exp();
        let probs = [e0 / (e0 + e1), e1 / (e0 + e1)];

        let cache = StepCache {
            x: x.to_vec(),
            h_prev: std::mem::replace(&mut state.hidden, hid.clone()),
            c_prev: std::mem::replace(&mut state.cell, c.clone()),
            gates,
            tanh_c,
            c,
            h: hid,
            z,
            u,
            probs,
            p_hat: sigmoid(lp[0]),
            f_hat: sigmoid(lf[0]),
        };
        debug_assert_eq!(cache.h.len(), h);
        cache
    }

    pub fn step(&self, x: &[f64], state: &mut LstmState) -> PredictionTriple {
        self.step_cached(x, state).prediction()
    }

    pub(crate) fn forward_cached(&self, xs: &[[f64; 4]]) -> Vec<StepCache> {
        let mut state = self.start();
        xs.iter().map(|x| self.step_cached(x, &mut state)).collect()
    }

    /// Summed per-step loss of a sequence.
    pub(crate) fn sequence_loss(
        &self,
        xs: &[[f64; 4]],
        labels: &[LabelTriple],
        heads: HeadWeights,
    ) -> f64 {
        self.forward_cached(xs)
            .iter()
            .zip(labels)
            .map(|(c, l)| step_loss(c, l, heads))
            .sum()
    }

    /// Back-propagation through time. Adds `scale * dL/dw` into `grad` and
    /// returns the summed (unscaled) loss.
    pub(crate) fn backward(
        &self,
        caches: &[StepCache],
        labels: &[LabelTriple],
        heads: HeadWeights,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let NetworkShape { hidden: h, dense: d, .. } = self.shape;
        let o = self.shape.offsets();
        let w = &self.weights;
        let mut loss = 0.0;
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut du = vec![0.0; d];
        let mut dz = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];

        for (cache, label) in caches.iter().zip(labels).rev() {
            loss += step_loss(cache, label, heads);

            let y = usize::from(label.correct);
            let dlogits = [
                scale * heads.classifier * (cache.probs[0] - f64::from(u8::from(y == 0))),
                scale * heads.classifier * (cache.probs[1] - f64::from(u8::from(y == 1))),
            ];
            let dp = scale
                * heads.precision
                * 2.0
                * (cache.p_hat - label.p_prefix)
                * cache.p_hat
                * (1.0 - cache.p_hat);
            let df = scale
                * heads.fmeasure
                * 2.0
                * (cache.f_hat - label.f_prefix)
                * cache.f_hat
                * (1.0 - cache.f_hat);

            outer_add(&mut grad[o.wc..o.bc], &dlogits, &cache.u);
            grad[o.bc] += dlogits[0];
            grad[o.bc + 1] += dlogits[1];
            outer_add(&mut grad[o.wp..o.bp], &[dp], &cache.u);
            grad[o.bp] += dp;
            outer_add(&mut grad[o.wf..o.bf], &[df], &cache.u);
            grad[o.bf] += df;

            du.iter_mut().for_each(|v| *v = 0.0);
            gemv_t_add(&mut du, &w[o.wc..o.bc], &dlogits);
            gemv_t_add(&mut du, &w[o.wp..o.bp], &[dp]);
            gemv_t_add(&mut du, &w[o.wf..o.bf], &[df]);
            for (g, u) in du.iter_mut().zip(&cache.u) {
                *g *= 1.0 - u * u;
            }
            outer_add(&mut grad[o.w1..o.b1], &du, &cache.z);
            for (g, v) in grad[o.b1..o.b1 + d].iter_mut().zip(&du) {
                *g += v;
            }

            dz.iter_mut().for_each(|v| *v = 0.0);
            gemv_t_add(&mut dz, &w[o.w1..o.b1], &du);

            let g = &cache.gates;
            for k in 0..h {
                let dh = dz[k] * (1.0 - cache.z[k] * cache.z[k]) + dh_next[k];
                let (gi, gf, gg, go) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let d_o = dh * cache.tanh_c[k];
                let dc = dh * go * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]) + dc_next[k];
                let d_i = dc * gg;
                let d_g = dc * gi;
                let d_f = dc * cache.c_prev[k];
                dc_next[k] = dc * gf;
                da[k] = d_i * gi * (1.0 - gi);
                da[h + k] = d_f * gf * (1.0 - gf);
                da[2 * h + k] = d_g * (1.0 - gg * gg);
                da[3 * h + k] = d_o * go * (1.0 - go);
            }
            outer_add(&mut grad[o.wx..o.wh], &da, &cache.x);
            outer_add(&mut grad[o.wh..o.b], &da, &cache.h_prev);
            for (gb, v) in grad[o.b..o.b + 4 * h].iter_mut().zip(&da) {
                *gb += v;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            gemv_t_add(&mut dh_next, &w[o.wh..o.b], &da);
        }
        debug_assert!(caches.iter().all(|c| c.c.len() == h));
        loss
    }
}

pub(crate) fn step_loss(cache: &StepCache, label: &LabelTriple, heads: HeadWeights) -> f64 {
    let p_true = cache.probs[usize::from(label.correct)].max(f64::MIN_POSITIVE);
    let ce = -p_true.ln();
    let mp = (cache.p_hat - label.p_prefix).powi(2);
    let mf = (cache.f_hat - label.f_prefix).powi(2);
    heads.classifier * ce + heads.precision * mp + heads.fmeasure * mf
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_count_matches_layout() {
        let s = NetworkShape { input: 4, hidden: 3, dense: 5 };
        let expected = 4 * 3 * 4 + 4 * 3 * 3 + 4 * 3 + 5 * 3 + 5 + 2 * 5 + 2 + 5 + 1 + 5 + 1;
        assert_eq!(s.parameter_count(), expected);
    }

    #[test]
    fn zero_network_is_neutral() {
        let net = Network::zeros(NetworkShape { input: 4, hidden: 8, dense: 6 });
        let mut st = net.start();
        let p = net.step(&[0.3, 0.2, 0.1, 0.9], &mut st);
        assert_eq!(p, PredictionTriple { pr_correct: 0.5, p_hat: 0.5, f_hat: 0.5 });
    }

    #[test]
    fn init_sets_forget_bias() {
        let shape = NetworkShape { input: 4, hidden: 8, dense: 6 };
        let net = Network::init(shape, &mut ChaCha8Rng::seed_from_u64(1));
        let o = shape.offsets();
        assert!(net.weights[o.b + 8..o.b + 16].iter().all(|&b| b == 1.0));
        assert!(net.weights[o.b..o.b + 8].iter().all(|&b| b == 0.0));
        assert!(net.validate().is_ok());
    }
}
