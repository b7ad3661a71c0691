use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spec::{sigmoid, Activation, LayerKind, LayerSpec, NetworkSpec};
use crate::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: Option<f64>,
}

/// Network weights plus the spec that gives them meaning.
///
/// Parameters live in one flat vector; `offsets[i]` is where layer `i` starts.
/// Within a layer the order is input matrix (row-major, gate blocks stacked),
/// recurrent matrix, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    spec: NetworkSpec,
    weights: Vec<f64>,
    offsets: Vec<usize>,
    pub history: Vec<EpochLoss>,
}

pub(crate) enum Signal {
    Seq(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

pub(crate) enum LayerCache {
    Embedding {
        indices: Vec<usize>,
    },
    Dense {
        input: Vec<f64>,
        pre: Vec<f64>,
        /// Activated values before the dropout mask.
        out: Vec<f64>,
        mask: Option<Vec<f64>>,
        /// Sequence length when the input was collapsed to its last step.
        collapsed: Option<usize>,
    },
    Gru {
        inputs: Vec<Vec<f64>>,
        hs: Vec<Vec<f64>>,
        z: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
        cand_pre: Vec<Vec<f64>>,
        cand: Vec<Vec<f64>>,
        mask: Option<Vec<Vec<f64>>>,
    },
    Lstm {
        inputs: Vec<Vec<f64>>,
        hs: Vec<Vec<f64>>,
        cs: Vec<Vec<f64>>,
        i: Vec<Vec<f64>>,
        f: Vec<Vec<f64>>,
        g_pre: Vec<Vec<f64>>,
        g: Vec<Vec<f64>>,
        o: Vec<Vec<f64>>,
        c_act: Vec<Vec<f64>>,
        mask: Option<Vec<Vec<f64>>>,
    },
}

fn matvec_acc(out: &mut [f64], w: &[f64], cols: usize, x: &[f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

fn matvec_t_acc(out: &mut [f64], w: &[f64], cols: usize, dy: &[f64]) {
    for (d, row) in dy.iter().zip(w.chunks_exact(cols)) {
        if *d == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += d * a;
        }
    }
}

fn outer_acc(grad: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (d, row) in dy.iter().zip(grad.chunks_exact_mut(cols)) {
        if *d == 0.0 {
            continue;
        }
        for (g, a) in row.iter_mut().zip(x) {
            *g += d * a;
        }
    }
}

fn dropout_mask<R: Rng>(rng: &mut R, width: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..width)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

fn glorot<R: Rng>(rng: &mut R, dst: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in dst {
        *w = rng.random_range(-limit..limit);
    }
}

impl TrainedModel {
    /// Glorot-uniform weights, zero biases, reproducible under `seed`.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = model.spec.layer_dims();
        for (idx, layer) in model.spec.layers.clone().iter().enumerate() {
            let (input, u) = dims[idx];
            let block = &mut model.weights[model.offsets[idx]..model.offsets[idx + 1]];
            match layer.kind {
                LayerKind::Dense => glorot(&mut rng, &mut block[..u * input], input, u),
                LayerKind::Gru | LayerKind::Lstm => {
                    let gates = if layer.kind == LayerKind::Gru { 3 } else { 4 };
                    let (w, rest) = block.split_at_mut(gates * u * input);
                    glorot(&mut rng, w, input, gates * u);
                    glorot(&mut rng, &mut rest[..gates * u * u], u, gates * u);
                }
                LayerKind::Embedding { vocab_size } => glorot(&mut rng, block, vocab_size, u),
            }
        }
        Ok(model)
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut offsets = vec![0];
        for (layer, (input, _)) in spec.layers.iter().zip(spec.layer_dims()) {
            let last = *offsets.last().unwrap();
            offsets.push(last + layer.param_count(input));
        }
        let total = *offsets.last().unwrap();
        Ok(Self { spec, weights: vec![0.0; total], offsets, history: Vec::new() })
    }

    pub fn from_weights(spec: NetworkSpec, weights: Vec<f64>) -> Result<Self, NeuralError> {
        let mut model = Self::zeros(spec)?;
        if weights.len() != model.weights.len() {
            return Err(NeuralError::Spec(format!(
                "expected {} parameters, got {}",
                model.weights.len(),
                weights.len()
            )));
        }
        model.weights = weights;
        Ok(model)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn layer_offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Inference pass: dropout disabled, returns the output vector.
    pub fn forward(&self, window: &[Vec<f64>]) -> Result<Vec<f64>, NeuralError> {
        self.check_window(window)?;
        let (out, _) = self.forward_impl::<ChaCha8Rng>(window, None, false);
        Ok(out)
    }

    pub(crate) fn check_window(&self, window: &[Vec<f64>]) -> Result<(), NeuralError> {
        if window.is_empty() {
            return Err(NeuralError::Dimension("empty input window".into()));
        }
        for (t, step) in window.iter().enumerate() {
            if step.len() != self.spec.input_dim {
                return Err(NeuralError::Dimension(format!(
                    "step {t} has {} features, network expects {}",
                    step.len(),
                    self.spec.input_dim
                )));
            }
        }
        if let LayerKind::Embedding { vocab_size } = self.spec.layers[0].kind {
            for (t, step) in window.iter().enumerate() {
                let idx = step[0];
                if idx < 0.0 || idx.fract() != 0.0 || idx as usize >= vocab_size {
                    return Err(NeuralError::Dimension(format!(
                        "step {t}: embedding index {idx} outside vocabulary of {vocab_size}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn forward_impl<R: Rng>(
        &self,
        window: &[Vec<f64>],
        mut rng: Option<&mut R>,
        keep_cache: bool,
    ) -> (Vec<f64>, Vec<LayerCache>) {
        let mut caches = Vec::new();
        let mut signal = Signal::Seq(window.to_vec());
        let dims = self.spec.layer_dims();
        for (idx, layer) in self.spec.layers.iter().enumerate() {
            let params = &self.weights[self.offsets[idx]..self.offsets[idx + 1]];
            let (input, units) = dims[idx];
            let train_dropout = layer.dropout > 0.0 && rng.is_some();
            let (next, cache) = match layer.kind {
                LayerKind::Embedding { .. } => {
                    let Signal::Seq(steps) = signal else { unreachable!() };
                    let indices: Vec<usize> = steps.iter().map(|s| s[0] as usize).collect();
                    let out = indices
                        .iter()
                        .map(|&i| params[i * units..(i + 1) * units].to_vec())
                        .collect();
                    (Signal::Seq(out), LayerCache::Embedding { indices })
                }
                LayerKind::Dense => {
                    let (x, collapsed) = match signal {
                        Signal::Seq(mut steps) => {
                            let t = steps.len();
                            (steps.pop().unwrap(), Some(t))
                        }
                        Signal::Flat(x) => (x, None),
                    };
                    let (w, b) = params.split_at(units * input);
                    let mut pre = b.to_vec();
                    matvec_acc(&mut pre, w, input, &x);
                    let activated: Vec<f64> = pre.iter().map(|&p| layer.activation.apply(p)).collect();
                    let mut out = activated.clone();
                    let mask = if train_dropout {
                        let m = dropout_mask(rng.as_deref_mut().unwrap(), units, layer.dropout);
                        out.iter_mut().zip(&m).for_each(|(o, k)| *o *= k);
                        Some(m)
                    } else {
                        None
                    };
                    let cache = LayerCache::Dense {
                        input: x,
                        pre,
                        out: activated,
                        mask,
                        collapsed,
                    };
                    (Signal::Flat(out), cache)
                }
                LayerKind::Gru => {
                    let Signal::Seq(steps) = signal else { unreachable!() };
                    let act = layer.activation;
                    let (w, rest) = params.split_at(3 * units * input);
                    let (u, b) = rest.split_at(3 * units * units);
                    let mut hs = vec![vec![0.0; units]];
                    let (mut zs, mut rs, mut cps, mut cs) = (vec![], vec![], vec![], vec![]);
                    let mut outs = Vec::with_capacity(steps.len());
                    let mut masks = Vec::new();
                    for x in &steps {
                        let h = hs.last().unwrap();
                        let mut gx = b.to_vec();
                        matvec_acc(&mut gx, w, input, x);
                        let mut z = gx[..units].to_vec();
                        let mut r = gx[units..2 * units].to_vec();
                        matvec_acc(&mut z, &u[..units * units], units, h);
                        matvec_acc(&mut r, &u[units * units..2 * units * units], units, h);
                        z.iter_mut().for_each(|v| *v = sigmoid(*v));
                        r.iter_mut().for_each(|v| *v = sigmoid(*v));
                        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
                        let mut cand_pre = gx[2 * units..].to_vec();
                        matvec_acc(&mut cand_pre, &u[2 * units * units..], units, &rh);
                        let cand: Vec<f64> = cand_pre.iter().map(|&p| act.apply(p)).collect();
                        let h_new: Vec<f64> = (0..units)
                            .map(|k| z[k] * h[k] + (1.0 - z[k]) * cand[k])
                            .collect();
                        let mut out = h_new.clone();
                        if train_dropout {
                            let m = dropout_mask(rng.as_deref_mut().unwrap(), units, layer.dropout);
                            out.iter_mut().zip(&m).for_each(|(o, k)| *o *= k);
                            masks.push(m);
                        }
                        outs.push(out);
                        hs.push(h_new);
                        zs.push(z);
                        rs.push(r);
                        cps.push(cand_pre);
                        cs.push(cand);
                    }
                    let cache = LayerCache::Gru {
                        inputs: steps,
                        hs,
                        z: zs,
                        r: rs,
                        cand_pre: cps,
                        cand: cs,
                        mask: train_dropout.then_some(masks),
                    };
                    (Signal::Seq(outs), cache)
                }
                LayerKind::Lstm => {
                    let Signal::Seq(steps) = signal else { unreachable!() };
                    let act = layer.activation;
                    let (w, rest) = params.split_at(4 * units * input);
                    let (u, b) = rest.split_at(4 * units * units);
                    let mut hs = vec![vec![0.0; units]];
                    let mut cs = vec![vec![0.0; units]];
                    let (mut is, mut fs, mut gps, mut gs, mut os, mut cas) =
                        (vec![], vec![], vec![], vec![], vec![], vec![]);
                    let mut outs = Vec::with_capacity(steps.len());
                    let mut masks = Vec::new();
                    for x in &steps {
                        let h = hs.last().unwrap();
                        let c = cs.last().unwrap();
                        let mut pre = b.to_vec();
                        matvec_acc(&mut pre, w, input, x);
                        matvec_acc(&mut pre, u, units, h);
                        let i: Vec<f64> = pre[..units].iter().map(|&v| sigmoid(v)).collect();
                        let f: Vec<f64> =
                            pre[units..2 * units].iter().map(|&v| sigmoid(v)).collect();
                        let g_pre = pre[2 * units..3 * units].to_vec();
                        let g: Vec<f64> = g_pre.iter().map(|&v| act.apply(v)).collect();
                        let o: Vec<f64> = pre[3 * units..].iter().map(|&v| sigmoid(v)).collect();
                        let c_new: Vec<f64> =
                            (0..units).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
                        let c_act: Vec<f64> = c_new.iter().map(|&v| act.apply(v)).collect();
                        let h_new: Vec<f64> = (0..units).map(|k| o[k] * c_act[k]).collect();
                        let mut out = h_new.clone();
                        if train_dropout {
                            let m = dropout_mask(rng.as_deref_mut().unwrap(), units, layer.dropout);
                            out.iter_mut().zip(&m).for_each(|(o, k)| *o *= k);
                            masks.push(m);
                        }
                        outs.push(out);
                        hs.push(h_new);
                        cs.push(c_new);
                        is.push(i);
                        fs.push(f);
                        gps.push(g_pre);
                        gs.push(g);
                        os.push(o);
                        cas.push(c_act);
                    }
                    let cache = LayerCache::Lstm {
                        inputs: steps,
                        hs,
                        cs,
                        i: is,
                        f: fs,
                        g_pre: gps,
                        g: gs,
                        o: os,
                        c_act: cas,
                        mask: train_dropout.then_some(masks),
                    };
                    (Signal::Seq(outs), cache)
                }
            };
            if keep_cache {
                caches.push(cache);
            }
            signal = next;
        }
        let out = match signal {
            Signal::Flat(v) => v,
            Signal::Seq(mut steps) => steps.pop().unwrap(),
        };
        (out, caches)
    }

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
    pub(crate) fn backward(&self, caches: &[LayerCache], d_out: Vec<f64>, grad: &mut [f64]) {
        let dims = self.spec.layer_dims();
        let mut signal = if self.spec.layers.iter().any(|l| l.kind == LayerKind::Dense) {
            Signal::Flat(d_out)
        } else {
            // No dense head: the output is the last step of the final sequence.
            let t = match caches.last() {
                Some(LayerCache::Gru { inputs, .. }) | Some(LayerCache::Lstm { inputs, .. }) => {
                    inputs.len()
                }
                Some(LayerCache::Embedding { indices }) => indices.len(),
                _ => 1,
            };
            let mut seq = vec![vec![0.0; d_out.len()]; t];
            seq[t - 1] = d_out;
            Signal::Seq(seq)
        };
        for idx in (0..self.spec.layers.len()).rev() {
            let layer: &LayerSpec = &self.spec.layers[idx];
            let params = &self.weights[self.offsets[idx]..self.offsets[idx + 1]];
            let g = &mut grad[self.offsets[idx]..self.offsets[idx + 1]];
            let (input, units) = dims[idx];
            signal = match (&caches[idx], signal) {
                (LayerCache::Embedding { indices }, Signal::Seq(dy)) => {
                    for (&i, d) in indices.iter().zip(&dy) {
                        for (gv, dv) in g[i * units..(i + 1) * units].iter_mut().zip(d) {
                            *gv += dv;
                        }
                    }
                    Signal::Seq(Vec::new())
                }
                (LayerCache::Dense { input: x, pre, out, mask, collapsed }, Signal::Flat(mut dy)) => {
                    if let Some(m) = mask {
                        dy.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
                    }
                    let dz: Vec<f64> = (0..units)
                        .map(|k| dy[k] * layer.activation.derivative(pre[k], out[k]))
                        .collect();
                    let (w, _) = params.split_at(units * input);
                    let (gw, gb) = g.split_at_mut(units * input);
                    outer_acc(gw, &dz, x);
                    gb.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
                    let mut dx = vec![0.0; input];
                    matvec_t_acc(&mut dx, w, input, &dz);
                    match collapsed {
                        Some(t) => {
                            let mut seq = vec![vec![0.0; input]; *t];
                            seq[t - 1] = dx;
                            Signal::Seq(seq)
                        }
                        None => Signal::Flat(dx),
                    }
                }
                (LayerCache::Gru { inputs, hs, z, r, cand_pre, cand, mask }, Signal::Seq(mut dy)) => {
                    if let Some(ms) = mask {
                        for (d, m) in dy.iter_mut().zip(ms) {
                            d.iter_mut().zip(m).for_each(|(a, k)| *a *= k);
                        }
                    }
                    let act = layer.activation;
                    let (w, rest) = params.split_at(3 * units * input);
                    let (u, _) = rest.split_at(3 * units * units);
                    let (gw, grest) = g.split_at_mut(3 * units * input);
                    let (gu, gb) = grest.split_at_mut(3 * units * units);
                    let steps = inputs.len();
                    let mut dxs = vec![vec![0.0; input]; steps];
                    let mut dh_next = vec![0.0; units];
                    for t in (0..steps).rev() {
                        let h = &hs[t];
                        let dh: Vec<f64> = (0..units).map(|k| dy[t][k] + dh_next[k]).collect();
                        let mut dh_prev: Vec<f64> = (0..units).map(|k| dh[k] * z[t][k]).collect();
                        let mut dpre = vec![0.0; 3 * units];
                        for k in 0..units {
                            let dz = dh[k] * (h[k] - cand[t][k]);
                            let dc = dh[k] * (1.0 - z[t][k]);
                            dpre[k] = dz * z[t][k] * (1.0 - z[t][k]);
                            dpre[2 * units + k] = dc * act.derivative(cand_pre[t][k], cand[t][k]);
                        }
                        let rh: Vec<f64> = (0..units).map(|k| r[t][k] * h[k]).collect();
                        let mut drh = vec![0.0; units];
                        let uh = &u[2 * units * units..];
                        matvec_t_acc(&mut drh, uh, units, &dpre[2 * units..]);
                        outer_acc(&mut gu[2 * units * units..], &dpre[2 * units..], &rh);
                        for k in 0..units {
                            let dr = drh[k] * h[k];
                            dh_prev[k] += drh[k] * r[t][k];
                            dpre[units + k] = dr * r[t][k] * (1.0 - r[t][k]);
                        }
                        matvec_t_acc(&mut dh_prev, &u[..2 * units * units], units, &dpre[..2 * units]);
                        outer_acc(&mut gu[..2 * units * units], &dpre[..2 * units], h);
                        outer_acc(gw, &dpre, &inputs[t]);
                        gb.iter_mut().zip(&dpre).for_each(|(a, b)| *a += b);
                        matvec_t_acc(&mut dxs[t], w, input, &dpre);
                        dh_next = dh_prev;
                    }
                    Signal::Seq(dxs)
                }
                (
                    LayerCache::Lstm { inputs, hs, cs, i, f, g_pre, g: gg, o, c_act, mask },
                    Signal::Seq(mut dy),
                ) => {
                    if let Some(ms) = mask {
                        for (d, m) in dy.iter_mut().zip(ms) {
                            d.iter_mut().zip(m).for_each(|(a, k)| *a *= k);
                        }
                    }
                    let act = layer.activation;
                    let (w, rest) = params.split_at(4 * units * input);
                    let (u, _) = rest.split_at(4 * units * units);
                    let (gw, grest) = g.split_at_mut(4 * units * input);
                    let (gu, gb) = grest.split_at_mut(4 * units * units);
                    let steps = inputs.len();
                    let mut dxs = vec![vec![0.0; input]; steps];
                    let mut dh_next = vec![0.0; units];
                    let mut dc_next = vec![0.0; units];
                    for t in (0..steps).rev() {
                        let c_prev = &cs[t];
                        let c_new = &cs[t + 1];
                        let mut dpre = vec![0.0; 4 * units];
                        let mut dc_prev = vec![0.0; units];
                        for k in 0..units {
                            let dh = dy[t][k] + dh_next[k];
                            let d_o = dh * c_act[t][k];
                            let dc = dc_next[k] + dh * o[t][k] * act.derivative(c_new[k], c_act[t][k]);
                            let di = dc * gg[t][k];
                            let dg = dc * i[t][k];
                            let df = dc * c_prev[k];
                            dc_prev[k] = dc * f[t][k];
                            dpre[k] = di * i[t][k] * (1.0 - i[t][k]);
                            dpre[units + k] = df * f[t][k] * (1.0 - f[t][k]);
                            dpre[2 * units + k] = dg * act.derivative(g_pre[t][k], gg[t][k]);
                            dpre[3 * units + k] = d_o * o[t][k] * (1.0 - o[t][k]);
                        }
                        let mut dh_prev = vec![0.0; units];
                        matvec_t_acc(&mut dh_prev, u, units, &dpre);
                        outer_acc(gu, &dpre, &hs[t]);
                        outer_acc(gw, &dpre, &inputs[t]);
                        gb.iter_mut().zip(&dpre).for_each(|(a, b)| *a += b);
                        matvec_t_acc(&mut dxs[t], w, input, &dpre);
                        dh_next = dh_prev;
                        dc_next = dc_prev;
                    }
                    Signal::Seq(dxs)
                }
                _ => unreachable!("layer cache and gradient shape disagree"),
            };
        }
    }

    /// Output-layer activation, used by callers that need to know whether
    /// the head is linear.
    pub fn output_activation(&self) -> Activation {
        self.spec.layers.last().map(|l| l.activation).unwrap_or(Activation::Linear)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(spec_layers: Vec<LayerSpec>, input_dim: usize) -> TrainedModel {
        TrainedModel::zeros(NetworkSpec::new(input_dim, spec_layers).unwrap()).unwrap()
    }

    #[test]
    fn zero_weights_linear_output_is_zero() {
        let m = single(
            vec![LayerSpec::lstm(3, Activation::Tanh), LayerSpec::dense(2, Activation::Linear)],
            4,
        );
        let out = m.forward(&[vec![1.0, 2.0, 3.0, 4.0], vec![0.5; 4]]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn same_seed_same_weights() {
        let spec = NetworkSpec::new(3, vec![LayerSpec::gru(4, Activation::Tanh), LayerSpec::dense(1, Activation::Linear)])
            .unwrap();
        let a = TrainedModel::init(spec.clone(), 7).unwrap();
        let b = TrainedModel::init(spec.clone(), 7).unwrap();
        let c = TrainedModel::init(spec, 8).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn lstm_single_unit_matches_hand_arithmetic() {
        // input 1, units 1: params = W[i,f,g,o], U[i,f,g,o], b[i,f,g,o]
        let spec = NetworkSpec::new(1, vec![LayerSpec::lstm(1, Activation::Tanh)]).unwrap();
        let w = vec![0.5, -0.3, 0.8, 0.1, 0.2, 0.4, -0.6, 0.7, 0.05, 0.1, -0.1, 0.2];
        let m = TrainedModel::from_weights(spec, w).unwrap();
        let x = 0.9_f64;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        // h0 = c0 = 0, so recurrent terms vanish
        let i = sig(0.5 * x + 0.05);
        let f = sig(-0.3 * x + 0.1);
        let g = (0.8 * x - 0.1).tanh();
        let o = sig(0.1 * x + 0.2);
        let c = f * 0.0 + i * g;
        let h = o * c.tanh();
        let out = m.forward(&[vec![x]]).unwrap();
        assert!((out[0] - h).abs() < 1e-15);
    }

    #[test]
    fn gru_single_unit_matches_hand_arithmetic() {
        // W[z,r,h], U[z,r,h], b[z,r,h]; two steps so the recurrent path matters
        let spec = NetworkSpec::new(1, vec![LayerSpec::gru(1, Activation::Tanh)]).unwrap();
        let w = vec![0.4, -0.2, 0.9, 0.3, 0.6, -0.5, 0.0, 0.1, -0.2];
        let m = TrainedModel::from_weights(spec, w).unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let step = |x: f64, h: f64| {
            let z = sig(0.4 * x + 0.3 * h);
            let r = sig(-0.2 * x + 0.6 * h + 0.1);
            let cand = (0.9 * x - 0.5 * (r * h) - 0.2).tanh();
            z * h + (1.0 - z) * cand
        };
        let h1 = step(1.0, 0.0);
        let h2 = step(-0.5, h1);
        let out = m.forward(&[vec![1.0], vec![-0.5]]).unwrap();
        assert!((out[0] - h2).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_feature_width() {
        let m = single(vec![LayerSpec::dense(2, Activation::Linear)], 3);
        assert!(matches!(m.forward(&[vec![1.0]]), Err(NeuralError::Dimension(_))));
        assert!(m.forward(&[]).is_err());
    }

    #[test]
    fn embedding_lookup() {
        let spec = NetworkSpec::new(1, vec![LayerSpec::embedding(3, 2)]).unwrap();
        let m = TrainedModel::from_weights(spec, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.forward(&[vec![0.0], vec![2.0]]).unwrap(), vec![5.0, 6.0]);
        assert!(m.forward(&[vec![3.0]]).is_err());
    }
}
