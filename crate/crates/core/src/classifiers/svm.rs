//! Linear SVM trained with the Pegasos subgradient method.

use crate::numerics::{ModelIo, Packer, Rng, Tensor, Unpacker};
use crate::real::Real;
use crate::{tags, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LinearSvmConfig {
    /// Soft-margin cost. Zero or negative means infinite regularization and
    /// yields the all-zero model.
    pub cost: f64,
    pub epochs: usize,
}

impl Default for LinearSvmConfig {
    fn default() -> Self {
        LinearSvmConfig { cost: 1.0, epochs: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel<T: Real> {
    weights: Vec<T>,
    bias: T,
}

impl<T: Real> LinearSvmModel<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    /// Signed margin `w . x + b`.
    pub fn decision(&self, x: &[T]) -> Result<T> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), got: x.len() });
        }
        let mut acc = self.bias;
        for (w, v) in self.weights.iter().zip(x) {
            acc += *w * *v;
        }
        Ok(acc)
    }

    pub fn predict(&self, x: &[T]) -> Result<bool> {
        Ok(self.decision(x)? > T::zero())
    }
}

impl<T: Real> ModelIo for LinearSvmModel<T> {
    const TAG: u32 = tags::LINEAR_SVM;

    fn encode(&self, p: &mut Packer) {
        p.push_usize(self.weights.len());
        for w in &self.weights {
            p.push(w.as_f64());
        }
        p.push(self.bias.as_f64());
    }

    fn decode(u: &mut Unpacker) -> Result<Self> {
        let d = u.take_usize()?;
        let mut weights = Vec::with_capacity(d);
        for _ in 0..d {
            weights.push(T::of(u.take()?));
        }
        let bias = T::of(u.take()?);
        Ok(LinearSvmModel { weights, bias })
    }
}

/// Pegasos: stochastic subgradient descent on the hinge loss with
/// regularization `lambda = 1 / (cost * n)` and step size `1 / (lambda * t)`.
/// Visits every sample once per epoch in a freshly shuffled order. The bias
/// is an augmented constant feature, regularized like any other weight; an
/// unregularized bias would keep the huge first-step updates (step size
/// `1 / lambda`) forever.
pub fn fit_linear_svm<T: Real>(
    features: &Tensor<T>,
    labels: &[bool],
    config: &LinearSvmConfig,
    rng: &mut Rng,
) -> Result<LinearSvmModel<T>> {
    let n = features.rows();
    let d = features.cols();
    if n == 0 || d == 0 {
        return Err(Error::DegenerateInput("SVM training needs a non-empty feature matrix".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if config.cost <= 0.0 {
        return Ok(LinearSvmModel { weights: vec![T::zero(); d], bias: T::zero() });
    }

    let lambda = T::of(1.0 / (config.cost * n as f64));
    // Index d is the bias slot, fed by a constant 1 input.
    let mut weights = vec![T::zero(); d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;

    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = T::one() / (lambda * T::of(t as f64));
            let y = if labels[i] { T::one() } else { -T::one() };
            let row = features.row(i);
            let mut margin = weights[d];
            for (w, v) in weights.iter().zip(row) {
                margin += *w * *v;
            }
            let shrink = T::one() - eta * lambda;
            let hinge_active = y * margin < T::one();
            for (j, w) in weights.iter_mut().enumerate() {
                *w *= shrink;
                if hinge_active {
                    let v = if j == d { T::one() } else { row[j] };
                    *w += eta * y * v;
                }
            }
        }
    }

    let bias = weights[d];
    weights.truncate(d);
    Ok(LinearSvmModel { weights, bias })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two Gaussian clouds separated along w = (1, -1).
    fn cloud_data(n: usize, gap: f64, seed: u64) -> (Tensor<f64>, Vec<bool>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let positive = i % 2 == 0;
            let center = if positive { gap } else { -gap };
            rows.push(center + 0.5 * rng.next_normal());
            rows.push(-center + 0.5 * rng.next_normal());
            labels.push(positive);
        }
        (Tensor::new(vec![n, 2], rows).unwrap(), labels)
    }

    #[test]
    fn separates_two_clouds() {
        let (x, y) = cloud_data(200, 2.0, 8);
        let mut rng = Rng::new(1);
        let model = fit_linear_svm(&x, &y, &LinearSvmConfig::default(), &mut rng).unwrap();
        let mut correct = 0;
        for i in 0..x.rows() {
            if model.predict(x.row(i)).unwrap() == y[i] {
                correct += 1;
            }
        }
        assert!(correct >= 198, "only {correct}/200 correct");
        // The separating direction should dominate: w points along (1, -1).
        assert!(model.weights()[0] > 0.0 && model.weights()[1] < 0.0);
    }

    #[test]
    fn zero_cost_yields_the_zero_model() {
        let (x, y) = cloud_data(50, 2.0, 3);
        let mut rng = Rng::new(1);
        let model =
            fit_linear_svm(&x, &y, &LinearSvmConfig { cost: 0.0, epochs: 200 }, &mut rng).unwrap();
        assert!(model.weights().iter().all(|&w| w == 0.0));
        assert_eq!(model.bias(), 0.0);
        assert_eq!(model.decision(&[5.0, -3.0]).unwrap(), 0.0);
    }

    #[test]
    fn duplicated_dataset_keeps_training_signs() {
        // Doubling every sample halves lambda but leaves the problem's
        // geometry unchanged; the learned signs on training data agree.
        let (x, y) = cloud_data(100, 2.0, 12);
        let mut doubled_rows = Vec::with_capacity(x.len() * 2);
        doubled_rows.extend_from_slice(x.data());
        doubled_rows.extend_from_slice(x.data());
        let x2 = Tensor::new(vec![200, 2], doubled_rows).unwrap();
        let mut y2 = y.clone();
        y2.extend_from_slice(&y);

        let mut rng_a = Rng::new(6);
        let mut rng_b = Rng::new(6);
        let m1 = fit_linear_svm(&x, &y, &LinearSvmConfig::default(), &mut rng_a).unwrap();
        let m2 = fit_linear_svm(&x2, &y2, &LinearSvmConfig::default(), &mut rng_b).unwrap();
        for i in 0..x.rows() {
            assert_eq!(m1.predict(x.row(i)).unwrap(), m2.predict(x.row(i)).unwrap(), "row {i}");
        }
    }

    #[test]
    fn rejects_shape_mismatches() {
        let x = Tensor::new(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let mut rng = Rng::new(1);
        assert!(matches!(
            fit_linear_svm(&x, &[true], &LinearSvmConfig::default(), &mut rng),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        let model = fit_linear_svm(&x, &[true, false], &LinearSvmConfig::default(), &mut rng).unwrap();
        assert!(model.decision(&[1.0]).is_err());
    }

    #[test]
    fn same_seed_reproduces_the_model() {
        let (x, y) = cloud_data(80, 1.5, 31);
        let mut rng_a = Rng::new(44);
        let mut rng_b = Rng::new(44);
        let a = fit_linear_svm(&x, &y, &LinearSvmConfig::default(), &mut rng_a).unwrap();
        let b = fit_linear_svm(&x, &y, &LinearSvmConfig::default(), &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn container_roundtrip_preserves_the_model() {
        let (x, y) = cloud_data(40, 2.0, 9);
        let mut rng = Rng::new(2);
        let model = fit_linear_svm(&x, &y, &LinearSvmConfig::default(), &mut rng).unwrap();
        let restored = LinearSvmModel::<f64>::from_container(&model.to_container()).unwrap();
        assert_eq!(model, restored);
    }
}
