use crate::{Error, Real, Result};

/// Dense row-major tensor. Mostly used as a matrix (`shape = [rows, cols]`)
/// for feature sets and model parameters; the network code also stores 4-D
/// weight blocks. Public constructors and ops reject non-finite values so
/// NaNs cannot propagate silently through a pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} wants {} values, got {}",
                shape,
                n,
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.check_finite()?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![T::zero(); n] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor { shape: vec![rows, cols], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() needs a matrix");
        self.shape[0]
    }

    /// Columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() needs a matrix");
        self.shape[1]
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        let w = self.cols();
        self.data[r * w + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        let w = self.cols();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let w = self.cols();
        &mut self.data[r * w..(r + 1) * w]
    }

    pub fn transpose(&self) -> Tensor<T> {
        let (m, n) = (self.rows(), self.cols());
        let mut out = Tensor::zeros(vec![n, m]);
        for i in 0..m {
            for j in 0..n {
                out.data[j * m + i] = self.data[i * n + j];
            }
        }
        out
    }

    /// Matrix product via the scalar's GEMM kernel.
    pub fn matmul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        if self.shape.len() != 2 || rhs.shape.len() != 2 {
            return Err(Error::ShapeMismatch("matmul needs matrices".into()));
        }
        if self.cols() != rhs.rows() {
            return Err(Error::ShapeMismatch(format!(
                "matmul {}x{} * {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        let (m, k, n) = (self.rows(), self.cols(), rhs.cols());
        let mut out = Tensor::zeros(vec![m, n]);
        T::gemm(m, k, n, T::one(), &self.data, &rhs.data, T::zero(), &mut out.data);
        out.check_finite()?;
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if self.cols() != x.len() {
            return Err(Error::DimensionMismatch { expected: self.cols(), got: x.len() });
        }
        let mut out = vec![T::zero(); self.rows()];
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x) {
                acc += *a * *b;
            }
            *o = acc;
        }
        Ok(out)
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for v in &self.data {
            if !v.is_finite() {
                return Err(Error::Numeric("non-finite value in tensor".into()));
            }
        }
        Ok(())
    }
}
