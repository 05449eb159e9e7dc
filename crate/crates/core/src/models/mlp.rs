//! One-hidden-layer perceptron: `input -> hidden (ReLU) -> output` logits.
//!
//! The same container doubles as the gradient buffer, so SGD updates are
//! plain `axpy` calls over matching shapes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    /// `hidden x input_dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `output_dim x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(input_dim: usize, hidden: usize, output_dim: usize) -> Self {
        MlpParams {
            input_dim,
            hidden,
            output_dim,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output_dim * hidden],
            b2: vec![0.0; output_dim],
        }
    }

    /// Every weight and bias uniform in `±1/sqrt(fan_in)` of its layer.
    pub fn init(input_dim: usize, hidden: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden, output_dim);
        let a1 = 1.0 / (input_dim as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        p.w1.iter_mut().chain(p.b1.iter_mut()).for_each(|w| *w = rng.random_range(-a1..a1));
        p.w2.iter_mut().chain(p.b2.iter_mut()).for_each(|w| *w = rng.random_range(-a2..a2));
        p
    }

    pub fn same_shape(&self) -> Self {
        Self::zeros(self.input_dim, self.hidden, self.output_dim)
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub fn squared_norm(&self) -> f64 {
        self.iter().map(|w| w * w).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|w| w.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &MlpParams) {
        debug_assert_eq!(self.num_params(), other.num_params());
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += alpha * b;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Activations> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let pre: Vec<f64> = self
            .w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| dot(row, x) + b)
            .collect();
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hidden layer".into()));
        }
        let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let output: Vec<f64> = self
            .w2
            .chunks_exact(self.hidden)
            .zip(&self.b2)
            .map(|(row, b)| dot(row, &hidden) + b)
            .collect();
        if output.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("output layer".into()));
        }
        Ok(Activations { pre, hidden, output })
    }

    /// Adds `d loss / d params` into `grad`, given `d loss / d output`.
    #[allow(clippy::needless_range_loop)]
    pub fn backward(&self, x: &[f64], act: &Activations, d_output: &[f64], grad: &mut MlpParams) {
        let mut d_hidden = vec![0.0; self.hidden];
        for (o, &g) in d_output.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.b2[o] += g;
            let row = o * self.hidden;
            for h in 0..self.hidden {
                grad.w2[row + h] += g * act.hidden[h];
                d_hidden[h] += g * self.w2[row + h];
            }
        }
        for h in 0..self.hidden {
            // ReLU derivative, taken as 0 at the kink.
            if act.pre[h] <= 0.0 {
                continue;
            }
            let g = d_hidden[h];
            grad.b1[h] += g;
            let row = h * self.input_dim;
            for (gw, xi) in grad.w1[row..row + self.input_dim].iter_mut().zip(x) {
                *gw += g * xi;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
