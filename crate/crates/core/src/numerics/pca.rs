use super::jacobi::sym_eig;
use crate::{Error, Real, Result, Tensor};

/// Basis fitting works on at most this many rows. For larger inputs a
/// deterministic evenly-strided subset fixes the eigenproblem size, which
/// keeps the Jacobi solve tractable at desk scale; the mean still uses every
/// row.
const FIT_CAP: usize = 1024;

/// Principal component basis. `components` holds one orthonormal component
/// per row (largest-magnitude entry positive), `explained_variance` the
/// matching descending eigenvalues of the centered covariance.
#[derive(Clone, Debug)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    pub components: Tensor<T>,
    pub explained_variance: Vec<T>,
}

/// Fits a PCA basis with `target_dims` components from `samples` (one row per
/// sample). Requires at least two samples and
/// `1 <= target_dims <= min(n - 1, d)`.
///
/// When the feature count exceeds the fitted row count the eigenproblem is
/// solved on the Gram matrix instead of the covariance; directions the data
/// does not span are completed with canonical basis vectors so the component
/// rows are always orthonormal, even on zero-variance input.
pub fn fit_pca<T: Real>(samples: &Tensor<T>, target_dims: usize) -> Result<PcaModel<T>> {
    let n = samples.rows();
    let d = samples.cols();
    if n < 2 {
        return Err(Error::DegenerateInput(format!("pca needs >= 2 samples, got {n}")));
    }
    if target_dims == 0 || target_dims > n.saturating_sub(1).min(d) {
        return Err(Error::DegenerateInput(format!(
            "pca target_dims {target_dims} outside 1..=min(n-1, d) = {}",
            n.saturating_sub(1).min(d)
        )));
    }
    if target_dims > FIT_CAP - 1 {
        return Err(Error::DegenerateInput(format!(
            "pca target_dims {target_dims} exceeds the fitting cap of {} rows",
            FIT_CAP
        )));
    }

    let mut mean = vec![T::zero(); d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(samples.row(r)) {
            *m += *v;
        }
    }
    let inv_n = T::one() / T::of(n as f64);
    for m in &mut mean {
        *m *= inv_n;
    }

    let n_fit = n.min(FIT_CAP);
    let fit_rows: Vec<usize> = (0..n_fit).map(|i| i * n / n_fit).collect();
    let mut centered = Tensor::<T>::zeros(vec![n_fit, d]);
    for (out_r, &src) in fit_rows.iter().enumerate() {
        for (c, (v, m)) in samples.row(src).iter().zip(&mean).enumerate() {
            centered.set(out_r, c, *v - *m);
        }
    }
    let denom = T::one() / T::of((n_fit - 1) as f64);

    let (eigvals, raw) = if d <= n_fit {
        // covariance route: d x d problem
        let mut cov = centered.transpose().matmul(&centered)?;
        cov.scale(denom);
        let (vals, vecs) = sym_eig(&cov)?;
        let mut comps = Tensor::<T>::zeros(vec![target_dims, d]);
        for k in 0..target_dims {
            comps.row_mut(k).copy_from_slice(vecs.row(k));
        }
        (vals[..target_dims].to_vec(), comps)
    } else {
        // Gram route: n_fit x n_fit problem, components lifted back through X^T
        let mut gram = centered.matmul(&centered.transpose())?;
        gram.scale(denom);
        let (vals, vecs) = sym_eig(&gram)?;
        let mut comps = Tensor::<T>::zeros(vec![target_dims, d]);
        let rank_floor = T::of(1e-12) * vals.first().copied().unwrap_or(T::zero()).max(T::one());
        for k in 0..target_dims {
            if vals[k] > rank_floor {
                let scale = T::one() / (vals[k] * T::of((n_fit - 1) as f64)).sqrt();
                let u = vecs.row(k);
                let out = comps.row_mut(k);
                for (r, &ur) in u.iter().enumerate() {
                    for (o, x) in out.iter_mut().zip(centered.row(r)) {
                        *o += ur * *x * scale;
                    }
                }
            }
            // rows under the rank floor stay zero and are completed below
        }
        (vals[..target_dims].to_vec(), comps)
    };

    let mut components = raw;
    complete_basis(&mut components);
    for k in 0..target_dims {
        let row = components.row_mut(k);
        let mut best = T::zero();
        for &x in row.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < T::zero() {
            for x in row.iter_mut() {
                *x = -*x;
            }
        }
    }

    let explained_variance = eigvals.into_iter().map(|v| v.max(T::zero())).collect();
    Ok(PcaModel { mean, components, explained_variance })
}

/// Replaces near-zero rows with canonical basis vectors orthogonalized
/// against the rest, so degenerate input still yields an orthonormal basis.
fn complete_basis<T: Real>(components: &mut Tensor<T>) {
    let (k, d) = (components.rows(), components.cols());
    let floor = T::of(1e-6);
    for r in 0..k {
        let norm: T = components.row(r).iter().map(|x| *x * *x).sum::<T>().sqrt();
        if norm > floor {
            let inv = T::one() / norm;
            for x in components.row_mut(r).iter_mut() {
                *x *= inv;
            }
            continue;
        }
        // try canonical vectors until one survives orthogonalization
        'candidates: for e in 0..d {
            let mut cand = vec![T::zero(); d];
            cand[e] = T::one();
            for prev in 0..k {
                if prev == r {
                    continue;
                }
                let p = components.row(prev);
                let pn: T = p.iter().map(|x| *x * *x).sum();
                if pn < floor {
                    continue;
                }
                let proj: T = p.iter().zip(&cand).map(|(a, b)| *a * *b).sum();
                for (c, pv) in cand.iter_mut().zip(p) {
                    *c = *c - proj * *pv;
                }
            }
            let norm: T = cand.iter().map(|x| *x * *x).sum::<T>().sqrt();
            if norm > T::of(0.5) {
                let inv = T::one() / norm;
                for (slot, c) in components.row_mut(r).iter_mut().zip(&cand) {
                    *slot = *c * inv;
                }
                break 'candidates;
            }
        }
    }
}

impl<T: Real> PcaModel<T> {
    pub fn dims(&self) -> usize {
        self.components.rows()
    }

    pub fn input_dims(&self) -> usize {
        self.components.cols()
    }

    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: x.len() });
        }
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(a, m)| *a - *m).collect();
        self.components.matvec(&centered)
    }

    pub fn project_batch(&self, xs: &Tensor<T>) -> Result<Tensor<T>> {
        if xs.cols() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: xs.cols() });
        }
        let mut centered = xs.clone();
        for r in 0..centered.rows() {
            for (v, m) in centered.row_mut(r).iter_mut().zip(&self.mean) {
                *v -= *m;
            }
        }
        centered.matmul(&self.components.transpose())
    }

    pub fn reconstruct(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), got: z.len() });
        }
        let mut out = self.mean.clone();
        for (k, &zk) in z.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.components.row(k)) {
                *o += zk * *c;
            }
        }
        Ok(out)
    }
}

impl<T: Real> super::ModelIo for PcaModel<T> {
    const TAG: u32 = crate::tags::PCA;

    fn encode(&self, p: &mut super::Packer) {
        p.push_usize(self.dims());
        p.push_usize(self.input_dims());
        for m in &self.mean {
            p.push(m.as_f64());
        }
        for k in 0..self.dims() {
            for v in self.components.row(k) {
                p.push(v.as_f64());
            }
        }
        for v in &self.explained_variance {
            p.push(v.as_f64());
        }
    }

    fn decode(u: &mut super::Unpacker) -> Result<Self> {
        let dims = u.take_usize()?;
        let input_dims = u.take_usize()?;
        let mut mean = Vec::with_capacity(input_dims);
        for _ in 0..input_dims {
            mean.push(T::of(u.take()?));
        }
        let mut components = Tensor::zeros(vec![dims, input_dims]);
        for k in 0..dims {
            for j in 0..input_dims {
                components.set(k, j, T::of(u.take()?));
            }
        }
        let mut explained_variance = Vec::with_capacity(dims);
        for _ in 0..dims {
            explained_variance.push(T::of(u.take()?));
        }
        Ok(PcaModel { mean, components, explained_variance })
    }
}
