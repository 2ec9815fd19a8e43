//! Online multinomial logistic regression, one SGD step per labelled sample.

use crate::numerics::{ModelIo, Packer, Tensor, Unpacker};
use crate::real::Real;
use crate::{tags, Error, Result};

/// Softmax classifier over 1 to 4 classes updated one observation at a time.
/// With a single class it degenerates to always predicting that class.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineLogRegModel<T: Real> {
    /// classes x feature_dim weight matrix.
    weights: Tensor<T>,
    biases: Vec<T>,
    learning_rate: T,
    l2_decay: T,
    update_count: u64,
}

impl<T: Real> OnlineLogRegModel<T> {
    pub fn new(classes: usize, feature_dim: usize, learning_rate: f64, l2_decay: f64) -> Result<Self> {
        if !(1..=4).contains(&classes) {
            return Err(Error::DegenerateInput(format!(
                "class count {classes} outside the supported 1..=4 range"
            )));
        }
        if feature_dim == 0 {
            return Err(Error::DegenerateInput("feature dimension must be positive".into()));
        }
        Ok(OnlineLogRegModel {
            weights: Tensor::zeros(vec![classes, feature_dim]),
            biases: vec![T::zero(); classes],
            learning_rate: T::of(learning_rate),
            l2_decay: T::of(l2_decay),
            update_count: 0,
        })
    }

    pub fn class_count(&self) -> usize {
        self.biases.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Softmax class probabilities; `[1.0]` for a single-class model.
    pub fn probabilities(&self, x: &[T]) -> Result<Vec<T>> {
        let logits = self.logits(x)?;
        let mut max = logits[0];
        for &v in &logits[1..] {
            if v > max {
                max = v;
            }
        }
        let mut probs: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
        let sum: T = probs.iter().copied().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(probs)
    }

    /// Most probable class; ties resolve to the lowest index.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        let probs = self.probabilities(x)?;
        let mut best = 0;
        for c in 1..probs.len() {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// One SGD step on the cross-entropy of (x, class) with L2 weight decay.
    pub fn update(&mut self, x: &[T], class: usize) -> Result<()> {
        if class >= self.class_count() {
            return Err(Error::OutOfBounds(format!(
                "class {class} for a {}-class model",
                self.class_count()
            )));
        }
        let probs = self.probabilities(x)?;
        let lr = self.learning_rate;
        let decay = self.l2_decay;
        for c in 0..self.class_count() {
            let target = if c == class { T::one() } else { T::zero() };
            let err = probs[c] - target;
            let row = self.weights.row_mut(c);
            for (w, v) in row.iter_mut().zip(x) {
                *w -= lr * (err * *v + decay * *w);
            }
            self.biases[c] -= lr * err;
        }
        self.update_count += 1;
        Ok(())
    }

    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch { expected: self.feature_dim(), got: x.len() });
        }
        let mut out = self.biases.clone();
        for c in 0..self.class_count() {
            let row = self.weights.row(c);
            for (w, v) in row.iter().zip(x) {
                out[c] += *w * *v;
            }
        }
        Ok(out)
    }
}

impl<T: Real> ModelIo for OnlineLogRegModel<T> {
    const TAG: u32 = tags::ONLINE_LOGREG;

    fn encode(&self, p: &mut Packer) {
        p.push_usize(self.class_count());
        p.push_usize(self.feature_dim());
        p.push(self.learning_rate.as_f64());
        p.push(self.l2_decay.as_f64());
        p.push_usize(self.update_count as usize);
        for c in 0..self.class_count() {
            for v in self.weights.row(c) {
                p.push(v.as_f64());
            }
        }
        for b in &self.biases {
            p.push(b.as_f64());
        }
    }

    fn decode(u: &mut Unpacker) -> Result<Self> {
        let classes = u.take_usize()?;
        let feature_dim = u.take_usize()?;
        let learning_rate = u.take()?;
        let l2_decay = u.take()?;
        let update_count = u.take_usize()? as u64;
        let mut model = OnlineLogRegModel::new(classes, feature_dim, learning_rate, l2_decay)?;
        for c in 0..classes {
            for j in 0..feature_dim {
                model.weights.set(c, j, T::of(u.take()?));
            }
        }
        for b in model.biases.iter_mut() {
            *b = T::of(u.take()?);
        }
        model.update_count = update_count;
        Ok(model)
    }
}
