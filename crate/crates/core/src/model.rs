//! Linear softmax classifier over fixed features.
//!
//! Class `n_classes - 1` is reserved by the harness for out-of-distribution
//! points, so a task with `n` in-distribution classes trains `n + 1` outputs.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{dot, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub target_train_accuracy: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            weight_decay: 5e-4,
            target_train_accuracy: 0.99,
            max_epochs: 500,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        if !(self.target_train_accuracy > 0.0 && self.target_train_accuracy <= 1.0) {
            return Err(Error::config("target_train_accuracy must be in (0, 1]"));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::config(
                "max_epochs and batch_size must be at least 1",
            ));
        }
        Ok(())
    }

    /// Cosine-annealed learning rate for `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let t = epoch as f64 / self.max_epochs as f64;
        self.learning_rate * 0.5 * (1.0 + (PI * t).cos())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    n_classes: usize,
    dim: usize,
    /// Row-major `n_classes × dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Summary of one call to [`SoftmaxClassifier::train`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
}

impl SoftmaxClassifier {
    pub fn zeros(n_classes: usize, dim: usize) -> Result<Self> {
        Self::from_parameters(
            n_classes,
            dim,
            vec![0.0; n_classes * dim],
            vec![0.0; n_classes],
        )
    }

    pub fn from_parameters(
        n_classes: usize,
        dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if n_classes == 0 || dim == 0 {
            return Err(Error::config(
                "classifier needs at least one class and one feature",
            ));
        }
        if weights.len() != n_classes * dim || bias.len() != n_classes {
            return Err(Error::config(format!(
                "parameter shapes do not match {n_classes} classes × {dim} features"
            )));
        }
        Ok(Self {
            n_classes,
            dim,
            weights,
            bias,
        })
    }

    /// Xavier-uniform weights, zero bias.
    pub fn initialized(n_classes: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(n_classes, dim)?;
        let a = (6.0 / (dim + n_classes) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut m.weights {
            *w = rng.random_range(-a..=a);
        }
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn parameter_norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::data(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn proba_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.n_classes)
            .map(|c| dot(&self.weights[c * self.dim..(c + 1) * self.dim], x) + self.bias[c])
            .collect();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in &mut z {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in &mut z {
            *v /= sum;
        }
        z
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.proba_unchecked(x))
    }

    /// Argmax of the predicted distribution, lowest class on ties.
    pub fn hypothesized_label(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    /// Cross-entropy of `x` against class `y`.
    pub fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
        self.check_label(y)?;
        self.check_dim(x)?;
        let mut z: Vec<f64> = (0..self.n_classes)
            .map(|c| dot(&self.weights[c * self.dim..(c + 1) * self.dim], x) + self.bias[c])
            .collect();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in &mut z {
            *v -= max;
        }
        let lse = z.iter().map(|v| v.exp()).sum::<f64>().ln();
        Ok(lse - z[y])
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.n_classes {
            return Err(Error::data(format!(
                "label {y} out of range for {} classes",
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Gradient of the cross-entropy loss at `(x, y)` with respect to the
    /// weight matrix, flattened row-major: entry `c * dim + k` is
    /// `(p_c − [c == y]) · x_k`.
    pub fn gradient_embedding(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        self.check_label(y)?;
        let p = self.predict_proba(x)?;
        Ok(outer_residual(&p, y, x))
    }

    pub fn accuracy(&self, features: &EmbeddingMatrix, labels: &[usize]) -> Result<f64> {
        if features.rows() != labels.len() {
            return Err(Error::data("feature and label counts differ"));
        }
        if labels.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for (i, &y) in labels.iter().enumerate() {
            if self.hypothesized_label(features.row(i))? == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Trains a fresh model: parameters are re-initialized from `cfg.seed`
    /// on every call.
    pub fn train(
        features: &EmbeddingMatrix,
        labels: &[usize],
        n_classes: usize,
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainReport)> {
        cfg.validate()?;
        if labels.is_empty() {
            return Err(Error::config("cannot train on an empty labeled set"));
        }
        if features.rows() != labels.len() {
            return Err(Error::data(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        let mut model = Self::initialized(n_classes, features.dim(), cfg.seed)?;
        for &y in labels {
            model.check_label(y)?;
        }
        let mut sgd = Sgd::new(&model, cfg.momentum, cfg.weight_decay);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let mut grad_w = vec![0.0; model.weights.len()];
        let mut grad_b = vec![0.0; n_classes];
        let d = model.dim;

        let mut report = TrainReport {
            epochs: 0,
            final_loss: f64::NAN,
            train_accuracy: 0.0,
        };
        for epoch in 0..cfg.max_epochs {
            let lr = cfg.learning_rate_at(epoch);
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                grad_w.iter_mut().for_each(|g| *g = 0.0);
                grad_b.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let x = features.row(i);
                    let p = model.proba_unchecked(x);
                    for c in 0..n_classes {
                        let r = (p[c] - if c == labels[i] { 1.0 } else { 0.0 }) * scale;
                        grad_b[c] += r;
                        for (g, &xk) in grad_w[c * d..(c + 1) * d].iter_mut().zip(x) {
                            *g += r * xk;
                        }
                    }
                }
                sgd.step(&mut model, &grad_w, &grad_b, lr);
            }

            let mut loss = 0.0;
            let mut hits = 0usize;
            for (i, &y) in labels.iter().enumerate() {
                let x = features.row(i);
                loss += model.loss(x, y)?;
                if argmax(&model.proba_unchecked(x)) == y {
                    hits += 1;
                }
            }
            loss /= labels.len() as f64;
            if !loss.is_finite() {
                return Err(Error::numeric(format!(
                    "training loss is {loss} at epoch {epoch}"
                )));
            }
            report = TrainReport {
                epochs: epoch + 1,
                final_loss: loss,
                train_accuracy: hits as f64 / labels.len() as f64,
            };
            if report.train_accuracy >= cfg.target_train_accuracy {
                break;
            }
        }
        log::debug!(
            "trained {} examples for {} epochs: loss {:.4}, accuracy {:.3}",
            labels.len(),
            report.epochs,
            report.final_loss,
            report.train_accuracy
        );
        Ok((model, report))
    }
}

/// SGD with heavy-ball momentum and L2 weight decay on every parameter.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    weight_decay: f64,
    vel_w: Vec<f64>,
    vel_b: Vec<f64>,
}

impl Sgd {
    pub fn new(model: &SoftmaxClassifier, momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            vel_w: vec![0.0; model.weights.len()],
            vel_b: vec![0.0; model.bias.len()],
        }
    }

    pub fn step(&mut self, model: &mut SoftmaxClassifier, grad_w: &[f64], grad_b: &[f64], lr: f64) {
        let (m, wd) = (self.momentum, self.weight_decay);
        for ((w, v), g) in model.weights.iter_mut().zip(&mut self.vel_w).zip(grad_w) {
            *v = m * *v + g + wd * *w;
            *w -= lr * *v;
        }
        for ((b, v), g) in model.bias.iter_mut().zip(&mut self.vel_b).zip(grad_b) {
            *v = m * *v + g + wd * *b;
            *b -= lr * *v;
        }
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = c;
        }
    }
    best
}

/// `(p − e_y) ⊗ x`, flattened row-major.
pub fn outer_residual(p: &[f64], y: usize, x: &[f64]) -> Vec<f64> {
    // p_y − 1 written as −Σ_{c≠y} p_c: it stays nonzero for confident
    // predictions where the direct difference rounds to exactly 0
    let rest: f64 = p
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != y)
        .map(|(_, &v)| v)
        .sum();
    let mut out = Vec::with_capacity(p.len() * x.len());
    for (c, &pc) in p.iter().enumerate() {
        let r = if c == y { -rest } else { pc };
        out.extend(x.iter().map(|&xk| r * xk));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn blobs(rng: &mut ChaCha8Rng, per_class: usize) -> (EmbeddingMatrix, Vec<usize>) {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [[-3.0, 0.0], [3.0, 0.5]].iter().enumerate() {
            for _ in 0..per_class {
                for &m in center {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(m + 0.5 * z);
                }
                labels.push(c);
            }
        }
        (EmbeddingMatrix::new(labels.len(), 2, data).unwrap(), labels)
    }

    #[test]
    fn defaults_follow_reference_hyperparameters() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.momentum, 0.9);
        assert_eq!(c.weight_decay, 5e-4);
        assert_eq!(c.target_train_accuracy, 0.99);
        assert_eq!(c.max_epochs, 500);
        assert_eq!(c.batch_size, 32);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate_at(0), 0.001);
        assert!((c.learning_rate_at(250) - 0.0005).abs() < 1e-15);
        assert!(c.learning_rate_at(499) > 0.0);
    }

    #[test]
    fn uniform_at_zero_parameters() {
        let m = SoftmaxClassifier::zeros(3, 4).unwrap();
        let p = m.predict_proba(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(m.hypothesized_label(&[0.0; 4]).unwrap(), 0);
    }

    #[test]
    fn saturated_bias_dominates() {
        let m =
            SoftmaxClassifier::from_parameters(3, 1, vec![0.0; 3], vec![0.0, 800.0, 0.0]).unwrap();
        let p = m.predict_proba(&[1.0]).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-15);
        assert_eq!(m.hypothesized_label(&[1.0]).unwrap(), 1);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = SoftmaxClassifier::zeros(2, 3).unwrap();
        assert!(m.predict_proba(&[1.0]).is_err());
        assert!(m.gradient_embedding(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn gradient_embedding_hand_example() {
        let g = outer_residual(&[0.7, 0.3], 0, &[2.0]);
        assert!((g[0] + 0.6).abs() < 1e-15 && (g[1] - 0.6).abs() < 1e-15);
        assert!(outer_residual(&[0.0, 1.0, 0.0], 1, &[3.0, -1.0])
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_embedding_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = rng.random_range(2..6);
            let d = rng.random_range(1..6);
            let w: Vec<f64> = (0..c * d).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..c).map(|_| rng.sample(StandardNormal)).collect();
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let y = rng.random_range(0..c);
            let m = SoftmaxClassifier::from_parameters(c, d, w.clone(), b.clone()).unwrap();
            let g = m.gradient_embedding(&x, y).unwrap();
            let h = 1e-5;
            for k in 0..c * d {
                let mut wp = w.clone();
                wp[k] += h;
                let mut wm = w.clone();
                wm[k] -= h;
                let lp = SoftmaxClassifier::from_parameters(c, d, wp, b.clone())
                    .unwrap()
                    .loss(&x, y)
                    .unwrap();
                let lm = SoftmaxClassifier::from_parameters(c, d, wm, b.clone())
                    .unwrap()
                    .loss(&x, y)
                    .unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let err = (fd - g[k]).abs() / g[k].abs().max(fd.abs()).max(1e-6);
                assert!(err <= 1e-4, "k={k}: analytic {} fd {fd}", g[k]);
            }
        }
    }

    #[test]
    fn separable_blobs_reach_target_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y) = blobs(&mut rng, 50);
        let (m, report) = SoftmaxClassifier::train(&x, &y, 2, &TrainConfig::default()).unwrap();
        assert!(report.train_accuracy >= 0.99);
        assert!(report.epochs < 500);
        assert!(m.weights().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn single_example_is_memorized() {
        let x = EmbeddingMatrix::new(1, 2, vec![0.4, -1.2]).unwrap();
        for y in 0..2 {
            let (m, _) = SoftmaxClassifier::train(&x, &[y], 2, &TrainConfig::default()).unwrap();
            assert!(m.predict_proba(x.row(0)).unwrap()[y] > 0.5);
        }
    }

    #[test]
    fn training_is_deterministic_and_reinitializes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, y) = blobs(&mut rng, 20);
        let cfg = TrainConfig {
            seed: 9,
            ..TrainConfig::default()
        };
        let (a, _) = SoftmaxClassifier::train(&x, &y, 3, &cfg).unwrap();
        let (b, _) = SoftmaxClassifier::train(&x, &y, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let (c, _) = SoftmaxClassifier::train(&x, &y, 3, &TrainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_or_bad_labels_are_rejected() {
        let x = EmbeddingMatrix::empty(2).unwrap();
        assert!(matches!(
            SoftmaxClassifier::train(&x, &[], 2, &TrainConfig::default()),
            Err(Error::Config(_))
        ));
        let x = EmbeddingMatrix::new(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(SoftmaxClassifier::train(&x, &[3], 2, &TrainConfig::default()).is_err());
    }

    #[test]
    fn weight_decay_shrinks_parameters_without_data_gradient() {
        let mut m = SoftmaxClassifier::initialized(4, 3, 1).unwrap();
        m.bias = vec![0.3, -0.2, 0.1, 0.5];
        let mut sgd = Sgd::new(&m, 0.9, 5e-4);
        let zw = vec![0.0; 12];
        let zb = vec![0.0; 4];
        let mut prev = m.parameter_norm();
        for _ in 0..50 {
            sgd.step(&mut m, &zw, &zb, 0.1);
            let now = m.parameter_norm();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn divergence_surfaces_as_numeric_error() {
        let x = EmbeddingMatrix::new(2, 1, vec![1e10, -1e10]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e308,
            ..TrainConfig::default()
        };
        match SoftmaxClassifier::train(&x, &[0, 1], 2, &cfg).unwrap_err() {
            Error::Numeric(msg) => assert!(msg.contains("epoch 0"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
