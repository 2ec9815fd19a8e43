use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar type for the math core. Implemented for `f32` and `f64`; the `f64`
/// instantiation is the reference used by oracles and gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Default
    + Copy
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting a literal; panics only for NaN inputs that
    /// `FromPrimitive` rejects, which never happens for f32/f64.
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap()
    }

    /// Row-major GEMM: `c = alpha * a(m x k) * b(k x n) + beta * c`.
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], b: &[Self], beta: Self, c: &mut [Self]) {
        assert_eq!(a.len(), m * k, "gemm lhs size");
        assert_eq!(b.len(), k * n, "gemm rhs size");
        Self::gemm_strided(m, k, n, alpha, a, k as isize, 1, b, n as isize, 1, beta, c);
    }

    /// GEMM with explicit row/column strides on the inputs, so transposed
    /// views multiply without being materialized. `c` is always row-major
    /// `m x n`. Strides must describe in-bounds layouts.
    #[allow(clippy::too_many_arguments)]
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );
}

/// Largest linear index touched by an `(rows, cols)` matrix with the given
/// strides; used to bounds-check strided GEMM operands.
fn max_index(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    let r = rows as isize - 1;
    let c = cols as isize - 1;
    let corners = [0, r * rs, c * cs, r * rs + c * cs];
    corners.into_iter().max().unwrap_or(0) as usize
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm_strided(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
            ) {
                assert_eq!(c.len(), m * n, "gemm out size");
                if m == 0 || n == 0 {
                    return;
                }
                if k > 0 {
                    assert!(max_index(m, k, rsa, csa) < a.len(), "gemm lhs stride bounds");
                    assert!(max_index(k, n, rsb, csb) < b.len(), "gemm rhs stride bounds");
                }
                unsafe {
                    $gemm(
                        m, k, n, alpha,
                        a.as_ptr(), rsa, csa,
                        b.as_ptr(), rsb, csb,
                        beta,
                        c.as_mut_ptr(), n as isize, 1,
                    );
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                for j in 0..n {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_triple_loop() {
        let (m, k, n) = (5, 7, 4);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let expect = naive(m, k, n, &a, &b);
        let mut c = vec![0.0; m * n];
        f64::gemm(m, k, n, 1.0, &a, &b, 0.0, &mut c);
        for (x, y) in c.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn gemm_accumulates_with_beta() {
        let a = [1.0f32, 2.0, 3.0, 4.0];
        let b = [1.0f32, 0.0, 0.0, 1.0];
        let mut c = [10.0f32, 10.0, 10.0, 10.0];
        // c = 2*A*I + 1*c
        f32::gemm(2, 2, 2, 2.0, &a, &b, 1.0, &mut c);
        assert_eq!(c, [12.0, 14.0, 16.0, 18.0]);
    }

    #[test]
    fn strided_gemm_multiplies_transposed_views() {
        // A is stored 3x2 row-major; using swapped strides reads it as the
        // 2x3 transpose without copying.
        let a_stored = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]; // [[1,2],[3,4],[5,6]]
        let b = [1.0f64, 0.0, 2.0, 1.0, 0.0, 1.0]; // 3x2
        // A^T (2x3) * B (3x2):
        // [1 3 5; 2 4 6] * [[1,0],[2,1],[0,1]] = [[7,8],[10,10]]
        let mut c = vec![0.0f64; 4];
        f64::gemm_strided(2, 3, 2, 1.0, &a_stored, 1, 2, &b, 2, 1, 0.0, &mut c);
        assert_eq!(c, vec![7.0, 8.0, 10.0, 10.0]);
    }
}
