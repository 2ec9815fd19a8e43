use crate::{Error, Real, Result, Tensor};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the *rows* of the returned matrix. Each eigenvector is normalized so its
/// largest-magnitude entry is positive, which pins an otherwise arbitrary
/// sign and keeps downstream models reproducible.
pub fn sym_eig<T: Real>(a: &Tensor<T>) -> Result<(Vec<T>, Tensor<T>)> {
    if a.shape().len() != 2 || a.rows() != a.cols() {
        return Err(Error::ShapeMismatch("sym_eig needs a square matrix".into()));
    }
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (a.at(i, j) - a.at(j, i)).abs();
            let scale = T::one().max(a.at(i, j).abs());
            if d > T::of(1e-8) * scale {
                return Err(Error::ShapeMismatch("sym_eig needs a symmetric matrix".into()));
            }
        }
    }

    let mut m = a.clone();
    let mut v = Tensor::<T>::zeros(vec![n, n]);
    for i in 0..n {
        v.set(i, i, T::one());
    }

    let off = |m: &Tensor<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.at(i, j) * m.at(i, j);
                }
            }
        }
        s
    };
    let frob: T = m.data().iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = (T::epsilon() * T::of(n as f64) * frob).powi(2).max(T::min_positive_value());

    for _sweep in 0..64 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if apq.abs() <= T::epsilon() * frob {
                    continue;
                }
                let app = m.at(p, p);
                let aqq = m.at(q, q);
                let theta = (aqq - app) / (T::of(2.0) * apq);
                // smaller-angle root of t^2 + 2 t theta - 1 = 0
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vpk = v.at(p, k);
                    let vqk = v.at(q, k);
                    v.set(p, k, c * vpk - s * vqk);
                    v.set(q, k, s * vpk + c * vqk);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| m.at(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut vals = Vec::with_capacity(n);
    let mut vecs = Tensor::<T>::zeros(vec![n, n]);
    for (out_r, &src) in order.iter().enumerate() {
        vals.push(diag[src]);
        // flip so the largest-magnitude entry is positive
        let row = v.row(src);
        let mut best = T::zero();
        for &x in row {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        let flip = if best < T::zero() { -T::one() } else { T::one() };
        for k in 0..n {
            vecs.set(out_r, k, flip * v.at(src, k));
        }
    }
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    /// Closed-form eigenvalues of a symmetric 3x3 matrix via the
    /// trigonometric solution of the characteristic cubic. Independent of the
    /// Jacobi iteration above.
    fn eig3_closed_form(a: &Tensor<f64>) -> Vec<f64> {
        let p1 = a.at(0, 1).powi(2) + a.at(0, 2).powi(2) + a.at(1, 2).powi(2);
        let q = (a.at(0, 0) + a.at(1, 1) + a.at(2, 2)) / 3.0;
        let p2 = (a.at(0, 0) - q).powi(2) + (a.at(1, 1) - q).powi(2) + (a.at(2, 2) - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p < 1e-300 {
            return vec![q, q, q];
        }
        // B = (A - qI) / p, r = det(B)/2 clamped into [-1, 1]
        let b = |i: usize, j: usize| (a.at(i, j) - if i == j { q } else { 0.0 }) / p;
        let det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
            - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
            + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        vec![e1, e2, e3]
    }

    fn random_symmetric(n: usize, rng: &mut Rng) -> Tensor<f64> {
        let mut a = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            for j in i..n {
                let x = rng.next_normal();
                a.set(i, j, x);
                a.set(j, i, x);
            }
        }
        a
    }

    #[test]
    fn diagonal_matrix_recovers_sorted_entries() {
        let a = Tensor::new(vec![3, 3], vec![2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        let (vals, vecs) = sym_eig(&a).unwrap();
        assert_eq!(vals, vec![5.0, 2.0, -1.0]);
        assert_eq!(vecs.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(vecs.row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(vecs.row(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn eigenvalues_match_closed_form_cubic_on_random_3x3() {
        let mut rng = Rng::new(42);
        for _ in 0..50 {
            let a = random_symmetric(3, &mut rng);
            let (vals, _) = sym_eig(&a).unwrap();
            let expect = eig3_closed_form(&a);
            for (x, y) in vals.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-9, "jacobi {x} vs cubic {y}");
            }
        }
    }

    #[test]
    fn eigenpairs_satisfy_definition_and_orthonormality() {
        let mut rng = Rng::new(7);
        let a = random_symmetric(8, &mut rng);
        let (vals, vecs) = sym_eig(&a).unwrap();
        for i in 0..8 {
            let v: Vec<f64> = vecs.row(i).to_vec();
            let av = a.matvec(&v).unwrap();
            for k in 0..8 {
                assert!((av[k] - vals[i] * v[k]).abs() < 1e-9, "A v != lambda v");
            }
            for j in 0..8 {
                let d: f64 = vecs.row(i).iter().zip(vecs.row(j)).map(|(x, y)| x * y).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10, "orthonormality failed at ({i},{j}): {d}");
            }
        }
        // descending order
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn zero_matrix_yields_identity_basis() {
        let a = Tensor::<f64>::zeros(vec![4, 4]);
        let (vals, vecs) = sym_eig(&a).unwrap();
        assert_eq!(vals, vec![0.0; 4]);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(vecs.at(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(sym_eig(&a).is_err());
    }
}
