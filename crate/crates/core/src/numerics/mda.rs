use super::jacobi::sym_eig;
use crate::{Error, Real, Result, Tensor};

/// Multiple discriminant analysis: projects onto directions maximizing the
/// between-class to within-class scatter ratio. At most `classes - 1`
/// directions exist; asking for more clamps with a warning.
#[derive(Clone, Debug)]
pub struct MdaModel<T> {
    /// One unit-norm discriminant direction per row.
    pub projection: Tensor<T>,
    /// Per-class means in the projected space, rows aligned with `classes`.
    pub class_means: Tensor<T>,
    /// Sorted class ids seen at fit time.
    pub classes: Vec<usize>,
}

/// Fits MDA from `samples` (one row each) and integer class labels.
/// Needs at least two classes and at least two samples per class.
///
/// The within-class scatter is regularized by `eps * I` with
/// `eps = 1e-6 * trace(Sw) / d` (absolute floor `1e-12`), so zero-variance
/// input degrades to a canonical projection instead of failing.
pub fn fit_mda<T: Real>(
    samples: &Tensor<T>,
    labels: &[usize],
    target_dims: usize,
) -> Result<MdaModel<T>> {
    let n = samples.rows();
    let d = samples.cols();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if target_dims == 0 {
        return Err(Error::DegenerateInput("mda target_dims must be >= 1".into()));
    }

    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "mda needs >= 2 classes, got {}",
            classes.len()
        )));
    }
    let class_index = |label: usize| classes.binary_search(&label).unwrap();
    let mut counts = vec![0usize; classes.len()];
    for &l in labels {
        counts[class_index(l)] += 1;
    }
    if let Some(pos) = counts.iter().position(|&c| c < 2) {
        return Err(Error::DegenerateInput(format!(
            "mda class {} has {} samples, needs >= 2",
            classes[pos], counts[pos]
        )));
    }

    let max_dims = classes.len() - 1;
    let dims = if target_dims > max_dims {
        log::warn!("mda: requested {target_dims} dims, clamping to {max_dims} (classes - 1)");
        max_dims
    } else {
        target_dims
    };

    // class means and the global mean
    let mut mu_c = Tensor::<T>::zeros(vec![classes.len(), d]);
    for (r, &l) in labels.iter().enumerate() {
        let k = class_index(l);
        for (slot, v) in mu_c.row_mut(k).iter_mut().zip(samples.row(r)) {
            *slot += *v;
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        let inv = T::one() / T::of(c as f64);
        for v in mu_c.row_mut(k).iter_mut() {
            *v *= inv;
        }
    }
    let mut mu = vec![T::zero(); d];
    for r in 0..n {
        for (m, v) in mu.iter_mut().zip(samples.row(r)) {
            *m += *v;
        }
    }
    let inv_n = T::one() / T::of(n as f64);
    for m in &mut mu {
        *m *= inv_n;
    }

    // scatter matrices
    let mut sw = Tensor::<T>::zeros(vec![d, d]);
    for (r, &l) in labels.iter().enumerate() {
        let k = class_index(l);
        let diff: Vec<T> = samples.row(r).iter().zip(mu_c.row(k)).map(|(x, m)| *x - *m).collect();
        rank1_update(&mut sw, &diff, T::one());
    }
    let mut sb = Tensor::<T>::zeros(vec![d, d]);
    for (k, &c) in counts.iter().enumerate() {
        let diff: Vec<T> = mu_c.row(k).iter().zip(&mu).map(|(x, m)| *x - *m).collect();
        rank1_update(&mut sb, &diff, T::of(c as f64));
    }

    let trace: T = (0..d).map(|i| sw.at(i, i)).sum();
    let eps = (T::of(1e-6) * trace / T::of(d as f64)).max(T::of(1e-12));
    for i in 0..d {
        let v = sw.at(i, i) + eps;
        sw.set(i, i, v);
    }

    // reduce S_w^-1 S_b to a symmetric problem through the Cholesky factor
    let l = cholesky(&sw)?;
    let sb_t = solve_lower_multi(&l, &sb); // L^-1 Sb
    let m_t = solve_lower_multi(&l, &sb_t.transpose()); // L^-1 (L^-1 Sb)^T
    let mut m = m_t.transpose();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = (m.at(i, j) + m.at(j, i)) * T::of(0.5);
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    let (_, vecs) = sym_eig(&m)?;

    let mut projection = Tensor::<T>::zeros(vec![dims, d]);
    for k in 0..dims {
        let w = solve_upper(&l, vecs.row(k)); // L^-T y
        let norm: T = w.iter().map(|x| *x * *x).sum::<T>().sqrt();
        let inv = if norm > T::of(1e-300) { T::one() / norm } else { T::one() };
        let mut best = T::zero();
        for &x in &w {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        let flip = if best < T::zero() { -T::one() } else { T::one() };
        for (slot, x) in projection.row_mut(k).iter_mut().zip(&w) {
            *slot = *x * inv * flip;
        }
    }

    let mut class_means = Tensor::<T>::zeros(vec![classes.len(), dims]);
    for k in 0..classes.len() {
        let z = projection.matvec(mu_c.row(k))?;
        class_means.row_mut(k).copy_from_slice(&z);
    }

    Ok(MdaModel { projection, class_means, classes })
}

fn rank1_update<T: Real>(m: &mut Tensor<T>, v: &[T], w: T) {
    let d = v.len();
    let data = m.data_mut();
    for i in 0..d {
        let vi = v[i] * w;
        let row = &mut data[i * d..(i + 1) * d];
        for (slot, &vj) in row.iter_mut().zip(v) {
            *slot += vi * vj;
        }
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix.
fn cholesky<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let d = a.rows();
    let mut l = Tensor::<T>::zeros(vec![d, d]);
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a.at(i, j);
            for k in 0..j {
                sum = sum - l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if sum <= T::zero() {
                    return Err(Error::Numeric("cholesky pivot <= 0".into()));
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.at(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `L X = B` column-wise for lower-triangular `L`.
fn solve_lower_multi<T: Real>(l: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let d = l.rows();
    let cols = b.cols();
    let mut x = Tensor::<T>::zeros(vec![d, cols]);
    for c in 0..cols {
        for i in 0..d {
            let mut sum = b.at(i, c);
            for k in 0..i {
                sum = sum - l.at(i, k) * x.at(k, c);
            }
            x.set(i, c, sum / l.at(i, i));
        }
    }
    x
}

/// Solves `L^T x = y` for lower-triangular `L`.
fn solve_upper<T: Real>(l: &Tensor<T>, y: &[T]) -> Vec<T> {
    let d = l.rows();
    let mut x = vec![T::zero(); d];
    for i in (0..d).rev() {
        let mut sum = y[i];
        for k in (i + 1)..d {
            sum = sum - l.at(k, i) * x[k];
        }
        x[i] = sum / l.at(i, i);
    }
    x
}

impl<T: Real> MdaModel<T> {
    pub fn dims(&self) -> usize {
        self.projection.rows()
    }

    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.projection.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.projection.cols(),
                got: x.len(),
            });
        }
        self.projection.matvec(x)
    }

    /// Class id whose projected mean is closest to the projected input.
    pub fn nearest_class_mean(&self, x: &[T]) -> Result<usize> {
        let z = self.project(x)?;
        let mut best = (T::infinity(), 0usize);
        for (k, &class) in self.classes.iter().enumerate() {
            let d2: T = self
                .class_means
                .row(k)
                .iter()
                .zip(&z)
                .map(|(m, v)| (*m - *v) * (*m - *v))
                .sum();
            if d2 < best.0 {
                best = (d2, class);
            }
        }
        Ok(best.1)
    }
}

impl<T: Real> super::ModelIo for MdaModel<T> {
    const TAG: u32 = crate::tags::MDA;

    fn encode(&self, p: &mut super::Packer) {
        let (m, d) = (self.projection.rows(), self.projection.cols());
        p.push_usize(m);
        p.push_usize(d);
        p.push_usize(self.classes.len());
        for r in 0..m {
            for v in self.projection.row(r) {
                p.push(v.as_f64());
            }
        }
        for r in 0..self.classes.len() {
            for v in self.class_means.row(r) {
                p.push(v.as_f64());
            }
        }
        for &c in &self.classes {
            p.push_usize(c);
        }
    }

    fn decode(u: &mut super::Unpacker) -> Result<Self> {
        let m = u.take_usize()?;
        let d = u.take_usize()?;
        let class_count = u.take_usize()?;
        let mut projection = Tensor::zeros(vec![m, d]);
        for r in 0..m {
            for c in 0..d {
                projection.set(r, c, T::of(u.take()?));
            }
        }
        let mut class_means = Tensor::zeros(vec![class_count, m]);
        for r in 0..class_count {
            for c in 0..m {
                class_means.set(r, c, T::of(u.take()?));
            }
        }
        let mut classes = Vec::with_capacity(class_count);
        for _ in 0..class_count {
            classes.push(u.take_usize()?);
        }
        Ok(MdaModel { projection, class_means, classes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    fn two_gaussians(n_per: usize, rng: &mut Rng) -> (Tensor<f64>, Vec<usize>) {
        let mut xs = Tensor::zeros(vec![2 * n_per, 3]);
        let mut labels = Vec::new();
        for r in 0..2 * n_per {
            let class = r % 2;
            let center = if class == 0 { [-2.0, 0.0, 1.0] } else { [2.0, 1.0, -1.0] };
            for c in 0..3 {
                xs.set(r, c, center[c] + 0.3 * rng.next_normal());
            }
            labels.push(class);
        }
        (xs, labels)
    }

    #[test]
    fn separable_classes_classify_cleanly_by_nearest_mean() {
        let mut rng = Rng::new(8);
        let (xs, labels) = two_gaussians(60, &mut rng);
        let model = fit_mda(&xs, &labels, 1).unwrap();
        let mut errors = 0;
        for r in 0..xs.rows() {
            if model.nearest_class_mean(xs.row(r)).unwrap() != labels[r] {
                errors += 1;
            }
        }
        assert_eq!(errors, 0);
    }

    #[test]
    fn top_direction_satisfies_generalized_eigen_equation() {
        // Sb w = lambda (Sw + eps I) w for the learned direction; rebuild the
        // scatter matrices by hand and verify collinearity of Sb w and Sw_reg w.
        let mut rng = Rng::new(12);
        let (xs, labels) = two_gaussians(80, &mut rng);
        let model = fit_mda(&xs, &labels, 1).unwrap();
        let w: Vec<f64> = model.projection.row(0).to_vec();

        let n = xs.rows();
        let d = xs.cols();
        let mut mu = vec![0.0; d];
        let mut mu0 = vec![0.0; d];
        let mut mu1 = vec![0.0; d];
        let (mut n0, mut n1) = (0.0, 0.0);
        for r in 0..n {
            for c in 0..d {
                mu[c] += xs.at(r, c);
                if labels[r] == 0 {
                    mu0[c] += xs.at(r, c);
                } else {
                    mu1[c] += xs.at(r, c);
                }
            }
            if labels[r] == 0 {
                n0 += 1.0;
            } else {
                n1 += 1.0;
            }
        }
        for c in 0..d {
            mu[c] /= n as f64;
            mu0[c] /= n0;
            mu1[c] /= n1;
        }
        let mut sw = vec![vec![0.0; d]; d];
        for r in 0..n {
            let m = if labels[r] == 0 { &mu0 } else { &mu1 };
            for i in 0..d {
                for j in 0..d {
                    sw[i][j] += (xs.at(r, i) - m[i]) * (xs.at(r, j) - m[j]);
                }
            }
        }
        let trace: f64 = (0..d).map(|i| sw[i][i]).sum();
        let eps = 1e-6 * trace / d as f64;
        for (i, row) in sw.iter_mut().enumerate() {
            row[i] += eps;
        }
        let mut sb = vec![vec![0.0; d]; d];
        for (m, cnt) in [(&mu0, n0), (&mu1, n1)] {
            for i in 0..d {
                for j in 0..d {
                    sb[i][j] += cnt * (m[i] - mu[i]) * (m[j] - mu[j]);
                }
            }
        }
        let matvec = |m: &Vec<Vec<f64>>, v: &[f64]| -> Vec<f64> {
            m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
        };
        let lhs = matvec(&sb, &w);
        let rhs = matvec(&sw, &w);
        let lambda = lhs.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>()
            / rhs.iter().map(|b| b * b).sum::<f64>();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - lambda * b).abs() < 1e-6 * lambda.abs().max(1.0), "{a} vs {}", lambda * b);
        }
        assert!(lambda > 1.0, "top generalized eigenvalue should be large, got {lambda}");
    }

    #[test]
    fn requested_dims_clamp_to_classes_minus_one() {
        let mut rng = Rng::new(3);
        let (xs, labels) = two_gaussians(30, &mut rng);
        let model = fit_mda(&xs, &labels, 6).unwrap();
        assert_eq!(model.dims(), 1);
    }

    #[test]
    fn single_class_is_degenerate() {
        let xs = Tensor::from_fn(10, 3, |r, c| (r + c) as f64);
        let labels = vec![4usize; 10];
        assert!(matches!(fit_mda(&xs, &labels, 1), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn class_with_one_sample_is_degenerate() {
        let xs = Tensor::from_fn(5, 3, |r, c| (r * c) as f64);
        let labels = vec![0, 0, 0, 0, 1];
        assert!(matches!(fit_mda(&xs, &labels, 1), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn zero_variance_input_degrades_gracefully() {
        let xs = Tensor::from_fn(12, 4, |_, _| 3.5);
        let labels: Vec<usize> = (0..12).map(|r| r % 2).collect();
        let model = fit_mda(&xs, &labels, 1).unwrap();
        assert_eq!(model.dims(), 1);
        let z: Vec<f64> = model.project(&vec![3.5; 4]).unwrap();
        assert!(z[0].is_finite());
    }
}
