//! Weighted logistic regression trained by batch gradient descent.
//!
//! The objective is the weight-normalized binary cross-entropy
//! `sum_i w_i * bce_i / sum_i w_i` plus `l2 / 2 * |coef|^2` (the bias is not
//! penalized). Normalizing by the weight total makes integer weights
//! equivalent to row replication and leaves the optimum unchanged when all
//! weights are scaled together.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.5,
            epochs: 300,
            l2: 0.0,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        // a zero rate is legal and leaves the model at its all-zero start
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("logistic learning rate", "must be nonnegative"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("logistic l2", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    coefficients: Array1<f64>,
    bias: f64,
}

/// Objective value and gradient at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticGradient {
    pub loss: f64,
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn new(coefficients: Vec<f64>, bias: f64) -> Self {
        LogisticModel {
            coefficients: Array1::from(coefficients),
            bias,
        }
    }

    pub fn zeros(n_cols: usize) -> Self {
        LogisticModel::new(vec![0.0; n_cols], 0.0)
    }

    pub fn coefficients(&self) -> ArrayView1<'_, f64> {
        self.coefficients.view()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn margins(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.coefficients) + self.bias
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.margins(x).iter().map(|&z| sigmoid(z)).collect()
    }

    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &[bool], w: &[f64], l2: f64) -> LogisticGradient {
        self.sparse_loss_and_gradient(&SparseRows::new(x), y, w, l2)
    }

    fn sparse_loss_and_gradient(&self, x: &SparseRows, y: &[bool], w: &[f64], l2: f64) -> LogisticGradient {
        let total: f64 = w.iter().sum();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.coefficients.len()];
        let mut bias = 0.0;
        for i in 0..y.len() {
            let (cols, vals) = x.row(i);
            let z = self.bias + cols.iter().zip(vals).map(|(&c, &v)| self.coefficients[c] * v).sum::<f64>();
            let target = if y[i] { 1.0 } else { 0.0 };
            loss += w[i] * (softplus(z) - target * z);
            let residual = w[i] * (sigmoid(z) - target) / total;
            for (&c, &v) in cols.iter().zip(vals) {
                grad[c] += residual * v;
            }
            bias += residual;
        }
        for (g, &c) in grad.iter_mut().zip(self.coefficients.iter()) {
            *g += l2 * c;
        }
        loss = loss / total + 0.5 * l2 * self.coefficients.dot(&self.coefficients);
        LogisticGradient {
            loss,
            coefficients: grad,
            bias,
        }
    }

    /// Batch gradient descent from zero. Returns the model and the objective
    /// before each epoch and after the last (`epochs + 1` values).
    pub fn fit(x: ArrayView2<f64>, y: &[bool], w: &[f64], params: &LogisticParams) -> (Self, Vec<f64>) {
        let sparse = SparseRows::new(x);
        let mut model = LogisticModel::zeros(x.ncols());
        let mut history = Vec::with_capacity(params.epochs + 1);
        for _ in 0..params.epochs {
            let g = model.sparse_loss_and_gradient(&sparse, y, w, params.l2);
            history.push(g.loss);
            model
                .coefficients
                .scaled_add(-params.learning_rate, &Array1::from(g.coefficients));
            model.bias -= params.learning_rate * g.bias;
        }
        history.push(model.sparse_loss_and_gradient(&sparse, y, w, params.l2).loss);
        (model, history)
    }
}

/// Nonzero entries of a matrix, row by row. One-hot designs are mostly
/// zeros, so gradient passes only touch these.
struct SparseRows {
    starts: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn new(x: ArrayView2<f64>) -> Self {
        let mut starts = Vec::with_capacity(x.nrows() + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        starts.push(0);
        for row in x.outer_iter() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            starts.push(cols.len());
        }
        SparseRows { starts, cols, vals }
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.starts[i], self.starts[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }
}
