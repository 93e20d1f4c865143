use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layer `y = W x + b` with gradient accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `weights[o][i]`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(skip)]
    grad_w: Vec<Vec<f64>>,
    #[serde(skip)]
    grad_b: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let inputs = weights.first().map_or(0, Vec::len);
        if weights.len() != bias.len() || weights.iter().any(|r| r.len() != inputs) {
            return Err(Error::Config("dense layer shapes are inconsistent".into()));
        }
        let mut layer = DenseLayer {
            weights,
            bias,
            grad_w: Vec::new(),
            grad_b: Vec::new(),
        };
        layer.zero_grad();
        Ok(layer)
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self::new(vec![vec![0.0; inputs]; outputs], vec![0.0; outputs]).expect("consistent")
    }

    /// Weights uniform in `[-scale, scale)`, zero bias.
    pub fn random<R: Rng + ?Sized>(outputs: usize, inputs: usize, scale: f64, rng: &mut R) -> Self {
        let w = (0..outputs)
            .map(|_| {
                (0..inputs)
                    .map(|_| rng.random_range(-scale..scale))
                    .collect()
            })
            .collect();
        Self::new(w, vec![0.0; outputs]).expect("consistent")
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.outputs() * (self.inputs() + 1)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }

    /// Accumulates parameter gradients for one input and returns `dL/dx`.
    pub fn backward(&mut self, x: &[f64], d_out: &[f64]) -> Vec<f64> {
        if self.grad_w.len() != self.outputs() {
            self.zero_grad();
        }
        let mut d_x = vec![0.0; self.inputs()];
        for (o, &g) in d_out.iter().enumerate() {
            self.grad_b[o] += g;
            for (i, &xi) in x.iter().enumerate() {
                self.grad_w[o][i] += g * xi;
                d_x[i] += g * self.weights[o][i];
            }
        }
        d_x
    }

    pub fn zero_grad(&mut self) {
        self.grad_w = vec![vec![0.0; self.inputs()]; self.outputs()];
        self.grad_b = vec![0.0; self.outputs()];
    }

    /// Row-major weights followed by bias.
    pub fn params(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(&self.bias)
            .copied()
            .collect()
    }

    pub fn grads(&self) -> Vec<f64> {
        self.grad_w
            .iter()
            .flatten()
            .chain(&self.grad_b)
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Usage(
                "dense parameter vector has wrong length".into(),
            ));
        }
        let n_in = self.inputs();
        for (o, row) in self.weights.iter_mut().enumerate() {
            row.copy_from_slice(&flat[o * n_in..(o + 1) * n_in]);
        }
        let off = self.outputs() * n_in;
        self.bias.copy_from_slice(&flat[off..]);
        Ok(())
    }
}
