//! Reference trainable classifier: a linear model over hashed character
//! trigrams of (priority text + input text), trained by per-example gradient
//! descent on binary cross-entropy.
//!
//! Small enough to make the whole curriculum executable and verifiable at
//! desk scale; a real fine-tuning job replaces it behind [`TrainableModel`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::taxonomy::Polarity;
use crate::util::fnv1a;

use super::{TrainRow, TrainableModel};

/// Default feature-space size.
pub const DEFAULT_FEATURE_DIM: usize = 1 << 14;

/// Hashed-trigram linear classifier. Weights start at zero, so a fresh model
/// scores 0.5 on everything; all training is deterministic (no internal rng).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    weights: Vec<f64>,
    bias: f64,
    dim: usize,
}

impl ToyModel {
    pub fn new(dim: usize) -> ToyModel {
        ToyModel { weights: vec![0.0; dim], bias: 0.0, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn set_weight(&mut self, index: usize, value: f64) {
        self.weights[index] = value;
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn set_bias(&mut self, value: f64) {
        self.bias = value;
    }

    /// Sparse L2-normalized features: hashed character trigrams of the
    /// lowercased text. Unit feature norm keeps per-step movement of an
    /// example's own score at learning-rate scale, commensurate with the
    /// bias. Short texts fall back to the whole text as one gram.
    pub fn features(&self, text: &str) -> BTreeMap<usize, f64> {
        let lowered = text.to_lowercase();
        let chars: Vec<char> = lowered.chars().collect();
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        if chars.len() < 3 {
            let idx = (fnv1a(lowered.as_bytes()) % self.dim as u64) as usize;
            counts.insert(idx, 1.0);
        } else {
            for window in chars.windows(3) {
                let gram: String = window.iter().collect();
                let idx = (fnv1a(gram.as_bytes()) % self.dim as u64) as usize;
                *counts.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        for v in counts.values_mut() {
            *v /= norm;
        }
        counts
    }

    fn raw_score(&self, features: &BTreeMap<usize, f64>) -> f64 {
        let mut z = self.bias;
        for (&i, &x) in features {
            z += self.weights[i] * x;
        }
        z
    }

    /// Binary cross-entropy of one row at the current parameters, in the
    /// numerically stable softplus form: weight · (softplus(z) − y·z).
    pub fn loss(&self, row: &TrainRow) -> f64 {
        let features = self.features(&row.text);
        let z = self.raw_score(&features);
        let y = row.label.degenerate_confidence();
        row.weight * (softplus(z) - y * z)
    }

    /// Analytic gradient of [`Self::loss`]: sparse weight part plus bias part.
    pub fn gradient(&self, row: &TrainRow) -> (BTreeMap<usize, f64>, f64) {
        let features = self.features(&row.text);
        let z = self.raw_score(&features);
        let y = row.label.degenerate_confidence();
        let residual = row.weight * (sigmoid(z) - y);
        let grad: BTreeMap<usize, f64> =
            features.iter().map(|(&i, &x)| (i, residual * x)).collect();
        (grad, residual)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl TrainableModel for ToyModel {
    fn predict(&self, input: &str) -> (Polarity, f64) {
        let p = sigmoid(self.raw_score(&self.features(input)));
        let flag = if p > 0.5 { Polarity::Unsafe } else { Polarity::Safe };
        (flag, p)
    }

    fn fit_epoch(&mut self, rows: &[TrainRow], learning_rate: f64) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let mut total_loss = 0.0;
        for row in rows {
            total_loss += self.loss(row);
            let (grad, bias_grad) = self.gradient(row);
            for (i, g) in grad {
                self.weights[i] -= learning_rate * g;
            }
            self.bias -= learning_rate * bias_grad;
        }
        total_loss / rows.len() as f64
    }
}
