//! Multilayer perceptron with ReLU hidden layers and a sigmoid output.
//!
//! Training is mini-batch gradient descent on the weight-normalized binary
//! cross-entropy of each batch. Inverted dropout is applied to hidden
//! activations during training only; prediction uses the full network with
//! no rescaling. Weights start Xavier-uniform, biases at zero.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![400, 400, 400],
            dropout: 0.1,
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 64,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::invalid("mlp hidden", "layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("mlp dropout", "must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("mlp learning rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("mlp batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// Affine map `x * weights + bias` with `weights` shaped inputs × outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    fn xavier(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        DenseLayer {
            weights: Array2::from_shape_fn((n_in, n_out), |_| rng.random_range(-limit..=limit)),
            bias: Array1::zeros(n_out),
        }
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
}

impl MlpModel {
    /// Fresh network for `n_in` inputs with the given hidden widths.
    pub fn init(n_in: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut widths = vec![n_in];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths.windows(2).map(|w| DenseLayer::xavier(w[0], w[1], rng)).collect();
        MlpModel { layers }
    }

    /// Checks that the layers chain and end in a single output.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ModelFormat("mlp has no layers".into()));
        }
        for layer in &layers {
            if layer.bias.len() != layer.weights.ncols() {
                return Err(Error::ModelFormat("mlp bias width does not match its layer".into()));
            }
        }
        if layers.windows(2).any(|w| w[0].weights.ncols() != w[1].weights.nrows()) {
            return Err(Error::ModelFormat("mlp layer widths do not chain".into()));
        }
        if layers.last().is_some_and(|l| l.weights.ncols() != 1) {
            return Err(Error::ModelFormat("mlp output layer must have width 1".into()));
        }
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    /// Output-layer pre-activations.
    fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.apply(a.view());
            if i < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        a.column(0).to_owned()
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.logits(x).iter().map(|&z| sigmoid(z)).collect()
    }

    /// All parameters, layer by layer: weights row-major, then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layers.iter().map(DenseLayer::n_params).sum());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    /// Inverse of [`MlpModel::parameters`].
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(DenseLayer::n_params).sum();
        if values.len() != total {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: total,
            });
        }
        let mut at = 0;
        for layer in &mut self.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = values[at];
                at += 1;
            }
        }
        Ok(())
    }

    /// Weight-normalized cross-entropy and its gradient (ordered as
    /// [`MlpModel::parameters`]) with dropout off.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &[bool], w: &[f64]) -> (f64, Vec<f64>) {
        let (loss, grads) = self.backprop(x, y, w, None);
        let mut flat = Vec::with_capacity(self.parameters().len());
        for g in &grads {
            flat.extend(g.weights.iter());
            flat.extend(g.bias.iter());
        }
        (loss, flat)
    }

    /// Forward and backward pass. `masks` holds one scaled keep-mask per
    /// hidden layer.
    fn backprop(&self, x: ArrayView2<f64>, y: &[bool], w: &[f64], masks: Option<&[Array2<f64>]>) -> (f64, Vec<DenseLayer>) {
        let last = self.layers.len() - 1;
        // inputs[i] feeds layer i; pre[i] is layer i's hidden pre-activation
        let mut inputs: Vec<Array2<f64>> = vec![x.to_owned()];
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(last);
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(inputs[i].view());
            if i == last {
                inputs.push(z);
            } else {
                let mut a = z.mapv(|v| v.max(0.0));
                if let Some(m) = masks {
                    a *= &m[i];
                }
                pre.push(z);
                inputs.push(a);
            }
        }
        let logits = inputs.pop().expect("output layer").column(0).to_owned();

        let total: f64 = w.iter().sum();
        let mut loss = 0.0;
        let mut delta = Array2::<f64>::zeros((y.len(), 1));
        for i in 0..y.len() {
            let t = if y[i] { 1.0 } else { 0.0 };
            loss += w[i] * (softplus(logits[i]) - t * logits[i]);
            delta[[i, 0]] = w[i] * (sigmoid(logits[i]) - t) / total;
        }
        loss /= total;

        let mut grads: Vec<DenseLayer> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            grads.push(DenseLayer {
                weights: inputs[i].t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                back.zip_mut_with(&pre[i - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                if let Some(m) = masks {
                    back *= &m[i - 1];
                }
                delta = back;
            }
        }
        grads.reverse();
        (loss, grads)
    }

    fn step(&mut self, grads: &[DenseLayer], learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            layer.weights.scaled_add(-learning_rate, &g.weights);
            layer.bias.scaled_add(-learning_rate, &g.bias);
        }
    }

    /// One gradient step on a batch with the given dropout rate.
    pub fn sgd_step(&mut self, x: ArrayView2<f64>, y: &[bool], w: &[f64], params: &MlpParams, rng: &mut ChaCha8Rng) -> f64 {
        let masks: Option<Vec<Array2<f64>>> = (params.dropout > 0.0).then(|| {
            let keep = 1.0 - params.dropout;
            self.layers[..self.layers.len() - 1]
                .iter()
                .map(|l| {
                    Array2::from_shape_fn((x.nrows(), l.weights.ncols()), |_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                })
                .collect()
        });
        let (loss, grads) = self.backprop(x, y, w, masks.as_deref());
        self.step(&grads, params.learning_rate);
        loss
    }

    pub fn fit(x: ArrayView2<f64>, y: &[bool], w: &[f64], params: &MlpParams, seed: u64) -> Self {
        let mut init_rng = rng_from_seed(derive_seed(seed, "mlp-init"));
        let mut rng = rng_from_seed(derive_seed(seed, "mlp-train"));
        let mut model = MlpModel::init(x.ncols(), &params.hidden, &mut init_rng);
        let mut order: Vec<usize> = (0..y.len()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let bw: Vec<f64> = batch.iter().map(|&r| w[r]).collect();
                if !bw.iter().any(|&v| v > 0.0) {
                    continue;
                }
                let bx = x.select(Axis(0), batch);
                let by: Vec<bool> = batch.iter().map(|&r| y[r]).collect();
                model.sgd_step(bx.view(), &by, &bw, params, &mut rng);
            }
        }
        model
    }
}
