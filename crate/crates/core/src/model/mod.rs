//! The trainable classifier: a hashed bag-of-tokens logistic regression,
//! optionally with one tanh hidden layer, trained by mini-batch SGD on mean
//! binary cross-entropy.

mod features;
mod gradcheck;
mod serialize;

use std::borrow::Borrow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::Label;
use crate::seed;

pub use features::{feature_dim, featurize, Example, FeatureVector};
pub use gradcheck::{grad_check, grad_check_against, GradCheckReport, GRAD_CHECK_COORDS};
pub use serialize::{deserialize, serialize, serialized_len};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
pub const DEFAULT_BATCH_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("divergence detected: non-finite value at coordinate {0}")]
    Divergence(usize),
    #[error("malformed parameter file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    /// Weights plus one bias per output column.
    pub fn len(&self) -> usize {
        self.rows * self.cols + self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// 0 means plain logistic regression.
    pub hidden_dim: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            hidden_dim: 0,
        }
    }
}

/// Flat parameter vector. Each layer is stored as its `rows x cols` weight
/// matrix (row-major, one row per input) followed by `cols` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shapes: Vec<LayerShape>,
    pub flat: Vec<f64>,
    pub hyper: Hyper,
}

pub fn init_params(hidden_dim: usize, vocab_dim: usize, seed: u64) -> ModelParams {
    let input = feature_dim(vocab_dim);
    let shapes = if hidden_dim == 0 {
        vec![LayerShape {
            rows: input,
            cols: 1,
        }]
    } else {
        vec![
            LayerShape {
                rows: input,
                cols: hidden_dim,
            },
            LayerShape {
                rows: hidden_dim,
                cols: 1,
            },
        ]
    };
    let mut rng = seed::rng(seed, "init", &[]);
    let mut flat = Vec::with_capacity(shapes.iter().map(LayerShape::len).sum());
    for shape in &shapes {
        let s = (6.0 / (shape.rows + shape.cols) as f64).sqrt();
        flat.extend((0..shape.rows * shape.cols).map(|_| rng.gen_range(-s..s)));
        flat.extend(std::iter::repeat_n(0.0, shape.cols));
    }
    ModelParams {
        shapes,
        flat,
        hyper: Hyper {
            hidden_dim,
            ..Hyper::default()
        },
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean-BCE contribution of one example given its score: softplus(s) - y·s.
fn bce_from_score(score: f64, target: f64) -> f64 {
    softplus(score) - target * score
}

/// Phishing iff the probability is strictly above 0.5.
pub fn predict(probability: f64) -> Label {
    if probability > 0.5 {
        Label::Phishing
    } else {
        Label::Legitimate
    }
}

impl ModelParams {
    pub fn with_hyper(mut self, hyper: Hyper) -> Self {
        assert_eq!(
            hyper.hidden_dim,
            self.hidden_dim(),
            "hidden_dim is fixed by the layer shapes"
        );
        self.hyper = hyper;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].rows
    }

    pub fn hidden_dim(&self) -> usize {
        if self.shapes.len() == 2 {
            self.shapes[0].cols
        } else {
            0
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            shapes: self.shapes.clone(),
            flat: vec![0.0; self.flat.len()],
            hyper: self.hyper,
        }
    }

    fn check_input(&self, x: &FeatureVector) -> Result<(), ModelError> {
        if x.dim() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Raw score plus hidden activations (empty for the logistic model).
    fn score(&self, x: &FeatureVector) -> (f64, Vec<f64>) {
        let first = self.shapes[0];
        let (w, b) = self.flat[..first.len()].split_at(first.rows * first.cols);
        if self.shapes.len() == 1 {
            return (
                b[0] + x.iter().map(|(i, v)| w[i] * v).sum::<f64>(),
                Vec::new(),
            );
        }
        let h = first.cols;
        let mut z = b.to_vec();
        for (i, v) in x.iter() {
            for (zj, wij) in z.iter_mut().zip(&w[i * h..(i + 1) * h]) {
                *zj += wij * v;
            }
        }
        let hidden: Vec<f64> = z.into_iter().map(f64::tanh).collect();
        let out = &self.flat[first.len()..];
        let score = out[h]
            + hidden
                .iter()
                .zip(&out[..h])
                .map(|(a, w)| a * w)
                .sum::<f64>();
        (score, hidden)
    }

    pub fn forward(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check_input(x)?;
        Ok(sigmoid(self.score(x).0))
    }

    /// Mean binary cross-entropy over a batch.
    pub fn loss<E: Borrow<Example>>(&self, batch: &[E]) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut total = 0.0;
        for ex in batch {
            let ex = ex.borrow();
            self.check_input(&ex.features)?;
            total += bce_from_score(self.score(&ex.features).0, ex.label.target());
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean binary cross-entropy and its gradient with respect to `flat`.
    pub fn loss_and_grad<E: Borrow<Example>>(
        &self,
        batch: &[E],
    ) -> Result<(f64, Vec<f64>), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut grad = vec![0.0; self.flat.len()];
        let mut total = 0.0;
        let first = self.shapes[0];
        let w_len = first.rows * first.cols;
        for ex in batch {
            let ex = ex.borrow();
            self.check_input(&ex.features)?;
            let (score, hidden) = self.score(&ex.features);
            let y = ex.label.target();
            total += bce_from_score(score, y);
            let d_score = sigmoid(score) - y;
            if hidden.is_empty() {
                for (i, v) in ex.features.iter() {
                    grad[i] += d_score * v;
                }
                grad[w_len] += d_score;
                continue;
            }
            let h = first.cols;
            let out = &self.flat[first.len()..];
            let (g_first, g_out) = grad.split_at_mut(first.len());
            for j in 0..h {
                g_out[j] += d_score * hidden[j];
            }
            g_out[h] += d_score;
            let dz: Vec<f64> = (0..h)
                .map(|j| d_score * out[j] * (1.0 - hidden[j] * hidden[j]))
                .collect();
            for (i, v) in ex.features.iter() {
                for (g, d) in g_first[i * h..(i + 1) * h].iter_mut().zip(&dz) {
                    *g += v * d;
                }
            }
            for (g, d) in g_first[w_len..].iter_mut().zip(&dz) {
                *g += d;
            }
        }
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }

    /// flat ← flat − η·grad.
    pub fn sgd_step(&self, grad: &[f64], learning_rate: f64) -> Result<ModelParams, ModelError> {
        let mut next = self.clone();
        next.sgd_step_in_place(grad, learning_rate)?;
        Ok(next)
    }

    pub fn sgd_step_in_place(
        &mut self,
        grad: &[f64],
        learning_rate: f64,
    ) -> Result<(), ModelError> {
        if grad.len() != self.flat.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.flat.len(),
                got: grad.len(),
            });
        }
        if let Some(bad) = grad.iter().position(|g| !g.is_finite()) {
            return Err(ModelError::Divergence(bad));
        }
        for (w, g) in self.flat.iter_mut().zip(grad) {
            *w -= learning_rate * g;
        }
        if let Some(bad) = self.flat.iter().position(|w| !w.is_finite()) {
            return Err(ModelError::Divergence(bad));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Label::{Legitimate, Phishing};
    use proptest::prelude::*;
    use rand::Rng;

    fn logistic(weights: &[f64], bias: f64) -> ModelParams {
        let mut flat = weights.to_vec();
        flat.push(bias);
        ModelParams {
            shapes: vec![LayerShape {
                rows: weights.len(),
                cols: 1,
            }],
            flat,
            hyper: Hyper::default(),
        }
    }

    fn ex(x: &[f64], label: Label) -> Example {
        Example {
            features: FeatureVector::from_dense(x),
            label,
        }
    }

    #[test]
    fn init_is_deterministic_with_expected_sizes() {
        let a = init_params(0, 16, 5);
        assert_eq!(a, init_params(0, 16, 5));
        assert_ne!(a, init_params(0, 16, 6));
        assert_eq!(a.flat.len(), 64 + 1);
        let m = init_params(8, 16, 5);
        assert_eq!(m.flat.len(), 64 * 8 + 8 + 8 + 1);
        let s = (6.0f64 / 65.0).sqrt();
        assert!(a.flat[..64].iter().all(|w| w.abs() < s));
        assert_eq!(a.flat[64], 0.0);
    }

    #[test]
    fn zero_params_give_one_half() {
        let p = logistic(&[0.0; 4], 0.0);
        assert_eq!(
            p.forward(&FeatureVector::from_dense(&[1.0, 2.0, 3.0, 4.0]))
                .unwrap(),
            0.5
        );
    }

    #[test]
    fn saturated_bias_is_stable() {
        let p = logistic(&[0.0; 2], 100.0);
        let prob = p.forward(&FeatureVector::from_dense(&[1.0, 0.0])).unwrap();
        assert!(prob >= 1.0 - 1e-40 && prob.is_finite());
        let low = logistic(&[0.0; 2], -1000.0);
        let batch = [ex(&[1.0, 0.0], Phishing)];
        let (loss, grad) = low.loss_and_grad(&batch).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn hand_set_logistic_three_quarters() {
        let p = logistic(&[3f64.ln(), 0.0], 0.0);
        let prob = p.forward(&FeatureVector::from_dense(&[1.0, 0.0])).unwrap();
        assert!((prob - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_sample_loss_and_score_gradient() {
        let p = logistic(&[3f64.ln(), 0.0], 0.0);
        let (loss, grad) = p.loss_and_grad(&[ex(&[1.0, 0.0], Phishing)]).unwrap();
        assert!((loss - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        // d loss / d score = p - y = -0.25; the bias gradient is exactly that.
        assert!((grad[2] + 0.25).abs() < 1e-15);
        assert!((grad[0] + 0.25).abs() < 1e-15);
        assert_eq!(grad[1], 0.0);
    }

    #[test]
    fn confident_correct_batch_has_vanishing_loss() {
        let p = logistic(&[60.0, -60.0], 0.0);
        let batch = [ex(&[1.0, 0.0], Phishing), ex(&[0.0, 1.0], Legitimate)];
        let (loss, grad) = p.loss_and_grad(&batch).unwrap();
        assert!(loss < 1e-20);
        assert!(grad.iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn duplicated_batch_same_loss_and_grad() {
        let p = init_params(3, 2, 11);
        let batch = vec![
            ex(&[0.1, 0.0, 0.5, 0.0, 0.2, 0.0, 0.0, 0.3], Phishing),
            ex(&[0.0, 0.4, 0.0, 0.1, 0.0, 0.0, 0.6, 0.0], Legitimate),
        ];
        let doubled: Vec<Example> = batch.iter().chain(&batch).cloned().collect();
        let (l1, g1) = p.loss_and_grad(&batch).unwrap();
        let (l2, g2) = p.loss_and_grad(&doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch_and_empty_batch() {
        let p = logistic(&[0.0; 3], 0.0);
        assert!(matches!(
            p.forward(&FeatureVector::from_dense(&[1.0])),
            Err(ModelError::DimensionMismatch { .. })
        ));
        assert_eq!(p.loss_and_grad::<Example>(&[]), Err(ModelError::EmptyBatch));
    }

    #[test]
    fn sgd_step_cases() {
        let p = logistic(&[1.0], 2.0);
        assert_eq!(p.sgd_step(&[10.0, -10.0], 0.0).unwrap(), p);
        assert_eq!(
            p.sgd_step(&[10.0, -10.0], 0.1).unwrap().flat,
            vec![0.0, 3.0]
        );
        let twice = p
            .sgd_step(&[0.5, 0.25], 0.2)
            .unwrap()
            .sgd_step(&[0.5, 0.25], 0.2)
            .unwrap();
        let once = p.sgd_step(&[0.5, 0.25], 0.4).unwrap();
        assert_eq!(twice.flat, once.flat);
        let err = p.sgd_step(&[f64::NAN, 0.0], 0.1).unwrap_err();
        assert!(err.to_string().contains("divergence detected"));
    }

    #[test]
    fn full_batch_gd_decreases_loss_on_separable_data() {
        let batch: Vec<Example> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                if i % 2 == 0 {
                    ex(&[0.5 + t, 0.1, 0.0, 0.2], Phishing)
                } else {
                    ex(&[0.1, 0.5 + t, 0.2, 0.0], Legitimate)
                }
            })
            .collect();
        let mut p = init_params(0, 1, 3);
        let mut prev = p.loss(&batch).unwrap();
        for _ in 0..50 {
            let (_, g) = p.loss_and_grad(&batch).unwrap();
            p.sgd_step_in_place(&g, 0.1).unwrap();
            let now = p.loss(&batch).unwrap();
            assert!(now < prev, "{now} !< {prev}");
            prev = now;
        }
    }

    #[test]
    fn threshold_ties_are_legitimate() {
        assert_eq!(predict(0.5), Legitimate);
        assert_eq!(predict(0.5000001), Phishing);
    }

    proptest! {
        #[test]
        fn batch_order_does_not_matter(seed in any::<u64>(), rot in 0usize..6) {
            let p = init_params(2, 2, seed);
            let mut rng = seed::rng(seed, "t", &[]);
            let batch: Vec<Example> = (0..6)
                .map(|i| ex(&(0..8).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<_>>(), if i % 2 == 0 { Phishing } else { Legitimate }))
                .collect();
            let mut rotated = batch.clone();
            rotated.rotate_left(rot);
            let (l1, g1) = p.loss_and_grad(&batch).unwrap();
            let (l2, g2) = p.loss_and_grad(&rotated).unwrap();
            prop_assert!((l1 - l2).abs() < 1e-14);
            prop_assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-14));
        }
    }
}
