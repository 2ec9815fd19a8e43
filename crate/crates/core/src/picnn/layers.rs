//! Network layers with explicit forward and backward passes.
//!
//! Convolutions lower to GEMM through im2col, one sample at a time, which
//! keeps activations in plain NCHW order. Backward passes reuse the same
//! lowering with transposed-view GEMMs. Nothing here knows about weight
//! decay: the optimizer applies it, so loss gradients stay pure.

use crate::real::Real;

/// Geometry of one convolution. `k` is the square kernel side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.k * self.k
    }

    pub fn in_len(&self) -> usize {
        self.in_channels * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.out_channels * self.out_h() * self.out_w()
    }

    pub fn valid(&self) -> bool {
        self.stride > 0
            && self.k > 0
            && self.in_h + 2 * self.pad >= self.k
            && self.in_w + 2 * self.pad >= self.k
            && self.pad < self.k
    }
}

/// Lowers one sample to the column matrix: row (c, di, dj), column (oy, ox),
/// zero where the kernel overhangs the padding.
pub fn im2col<T: Real>(x: &[T], spec: &ConvSpec, col: &mut [T]) {
    let (oh, ow) = (spec.out_h(), spec.out_w());
    debug_assert_eq!(x.len(), spec.in_len());
    debug_assert_eq!(col.len(), spec.patch_len() * oh * ow);
    let mut row = 0;
    for c in 0..spec.in_channels {
        let plane = &x[c * spec.in_h * spec.in_w..(c + 1) * spec.in_h * spec.in_w];
        for di in 0..spec.k {
            for dj in 0..spec.k {
                let out_row = &mut col[row * oh * ow..(row + 1) * oh * ow];
                let mut p = 0;
                for oy in 0..oh {
                    let sy = (oy * spec.stride + di) as isize - spec.pad as isize;
                    if sy < 0 || sy >= spec.in_h as isize {
                        out_row[p..p + ow].fill(T::zero());
                        p += ow;
                        continue;
                    }
                    let line = &plane[sy as usize * spec.in_w..(sy as usize + 1) * spec.in_w];
                    for ox in 0..ow {
                        let sx = (ox * spec.stride + dj) as isize - spec.pad as isize;
                        out_row[p] = if sx < 0 || sx >= spec.in_w as isize {
                            T::zero()
                        } else {
                            line[sx as usize]
                        };
                        p += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-adds a column-matrix gradient back onto the input gradient;
/// the exact adjoint of `im2col`.
pub fn col2im<T: Real>(col: &[T], spec: &ConvSpec, dx: &mut [T]) {
    let (oh, ow) = (spec.out_h(), spec.out_w());
    debug_assert_eq!(dx.len(), spec.in_len());
    debug_assert_eq!(col.len(), spec.patch_len() * oh * ow);
    let mut row = 0;
    for c in 0..spec.in_channels {
        let plane_base = c * spec.in_h * spec.in_w;
        for di in 0..spec.k {
            for dj in 0..spec.k {
                let col_row = &col[row * oh * ow..(row + 1) * oh * ow];
                let mut p = 0;
                for oy in 0..oh {
                    let sy = (oy * spec.stride + di) as isize - spec.pad as isize;
                    if sy < 0 || sy >= spec.in_h as isize {
                        p += ow;
                        continue;
                    }
                    let line_base = plane_base + sy as usize * spec.in_w;
                    for ox in 0..ow {
                        let sx = (ox * spec.stride + dj) as isize - spec.pad as isize;
                        if sx >= 0 && sx < spec.in_w as isize {
                            dx[line_base + sx as usize] += col_row[p];
                        }
                        p += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Convolution parameters: weights `[out_channels, patch_len]` row-major
/// plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T: Real> {
    pub spec: ConvSpec,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvLayer<T> {
    pub fn zeros(spec: ConvSpec) -> Self {
        assert!(spec.valid(), "invalid convolution spec {spec:?}");
        ConvLayer {
            spec,
            weights: vec![T::zero(); spec.out_channels * spec.patch_len()],
            bias: vec![T::zero(); spec.out_channels],
        }
    }

    /// Forward for a whole batch: `x` is `[n, in_len]`, `y` is `[n, out_len]`.
    /// `col` must hold `patch_len * out_h * out_w` scratch values.
    pub fn forward(&self, x: &[T], n: usize, col: &mut [T], y: &mut [T]) {
        let spec = &self.spec;
        let (m, k, cols) = (spec.out_channels, spec.patch_len(), spec.out_h() * spec.out_w());
        debug_assert_eq!(x.len(), n * spec.in_len());
        debug_assert_eq!(y.len(), n * spec.out_len());
        for i in 0..n {
            let xi = &x[i * spec.in_len()..(i + 1) * spec.in_len()];
            let yi = &mut y[i * spec.out_len()..(i + 1) * spec.out_len()];
            im2col(xi, spec, col);
            T::gemm(m, k, cols, T::one(), &self.weights, col, T::zero(), yi);
            for (oc, b) in self.bias.iter().enumerate() {
                for v in &mut yi[oc * cols..(oc + 1) * cols] {
                    *v += *b;
                }
            }
        }
    }

    /// Accumulates parameter gradients and writes the input gradient.
    /// `dw`/`db` are accumulated into (callers zero them per batch), `dx` is
    /// overwritten.
    pub fn backward(
        &self,
        x: &[T],
        dy: &[T],
        n: usize,
        col: &mut [T],
        dcol: &mut [T],
        dw: &mut [T],
        db: &mut [T],
        dx: &mut [T],
    ) {
        let spec = &self.spec;
        let (oc, k, cols) = (spec.out_channels, spec.patch_len(), spec.out_h() * spec.out_w());
        debug_assert_eq!(dw.len(), self.weights.len());
        debug_assert_eq!(db.len(), self.bias.len());
        debug_assert_eq!(dx.len(), n * spec.in_len());
        dx.fill(T::zero());
        for i in 0..n {
            let xi = &x[i * spec.in_len()..(i + 1) * spec.in_len()];
            let dyi = &dy[i * spec.out_len()..(i + 1) * spec.out_len()];
            let dxi = &mut dx[i * spec.in_len()..(i + 1) * spec.in_len()];
            im2col(xi, spec, col);
            // dW += dY (oc x cols) * col^T (cols x k)
            T::gemm_strided(
                oc, cols, k,
                T::one(),
                dyi, cols as isize, 1,
                col, 1, cols as isize,
                T::one(),
                dw,
            );
            for (c, dbc) in db.iter_mut().enumerate() {
                let mut acc = T::zero();
                for v in &dyi[c * cols..(c + 1) * cols] {
                    acc += *v;
                }
                *dbc += acc;
            }
            // dcol = W^T (k x oc) * dY (oc x cols), then scatter to dx.
            T::gemm_strided(
                k, oc, cols,
                T::one(),
                &self.weights, 1, k as isize,
                dyi, cols as isize, 1,
                T::zero(),
                dcol,
            );
            col2im(dcol, spec, dxi);
        }
    }
}

/// 3x3/stride-2 max pooling (any square window in general). The forward
/// pass records the flat input index of each maximum for exact routing of
/// gradients, ties resolving to the scan-order-first element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolSpec {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub k: usize,
    pub stride: usize,
}

impl PoolSpec {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.k) / self.stride + 1
    }

    pub fn in_len(&self) -> usize {
        self.channels * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.channels * self.out_h() * self.out_w()
    }
}

/// Batched max-pool forward; fills `y` and the argmax table.
pub fn maxpool_forward<T: Real>(x: &[T], n: usize, spec: &PoolSpec, y: &mut [T], argmax: &mut [u32]) {
    let (oh, ow) = (spec.out_h(), spec.out_w());
    debug_assert_eq!(x.len(), n * spec.in_len());
    debug_assert_eq!(y.len(), n * spec.out_len());
    debug_assert_eq!(argmax.len(), y.len());
    for i in 0..n {
        let xi = &x[i * spec.in_len()..(i + 1) * spec.in_len()];
        let base_out = i * spec.out_len();
        for c in 0..spec.channels {
            let plane = &xi[c * spec.in_h * spec.in_w..(c + 1) * spec.in_h * spec.in_w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = T::neg_infinity();
                    let mut best_at = 0usize;
                    for dy in 0..spec.k {
                        let sy = oy * spec.stride + dy;
                        for dx in 0..spec.k {
                            let sx = ox * spec.stride + dx;
                            let v = plane[sy * spec.in_w + sx];
                            if v > best {
                                best = v;
                                best_at = sy * spec.in_w + sx;
                            }
                        }
                    }
                    let out_at = base_out + (c * oh + oy) * ow + ox;
                    y[out_at] = best;
                    argmax[out_at] = (c * spec.in_h * spec.in_w + best_at) as u32;
                }
            }
        }
    }
}

/// Routes each output gradient to its recorded argmax position.
pub fn maxpool_backward<T: Real>(dy: &[T], n: usize, spec: &PoolSpec, argmax: &[u32], dx: &mut [T]) {
    debug_assert_eq!(dx.len(), n * spec.in_len());
    dx.fill(T::zero());
    for i in 0..n {
        let base_out = i * spec.out_len();
        let base_in = i * spec.in_len();
        for p in 0..spec.out_len() {
            dx[base_in + argmax[base_out + p] as usize] += dy[base_out + p];
        }
    }
}

/// Fully connected layer: weights `[out, in]` row-major plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer<T: Real> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> FcLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        FcLayer { in_dim, out_dim, weights: vec![T::zero(); out_dim * in_dim], bias: vec![T::zero(); out_dim] }
    }

    /// `x` is `[n, in]`, `y` becomes `[n, out]`: `Y = X W^T + b`.
    pub fn forward(&self, x: &[T], n: usize, y: &mut [T]) {
        debug_assert_eq!(x.len(), n * self.in_dim);
        debug_assert_eq!(y.len(), n * self.out_dim);
        T::gemm_strided(
            n, self.in_dim, self.out_dim,
            T::one(),
            x, self.in_dim as isize, 1,
            &self.weights, 1, self.in_dim as isize,
            T::zero(),
            y,
        );
        for r in 0..n {
            for (v, b) in y[r * self.out_dim..(r + 1) * self.out_dim].iter_mut().zip(&self.bias) {
                *v += *b;
            }
        }
    }

    /// Accumulates `dw`/`db`, overwrites `dx`.
    pub fn backward(&self, x: &[T], dy: &[T], n: usize, dw: &mut [T], db: &mut [T], dx: &mut [T]) {
        // dW += dY^T (out x n) * X (n x in)
        T::gemm_strided(
            self.out_dim, n, self.in_dim,
            T::one(),
            dy, 1, self.out_dim as isize,
            x, self.in_dim as isize, 1,
            T::one(),
            dw,
        );
        for r in 0..n {
            for (dbc, v) in db.iter_mut().zip(&dy[r * self.out_dim..(r + 1) * self.out_dim]) {
                *dbc += *v;
            }
        }
        // dX = dY (n x out) * W (out x in)
        T::gemm(n, self.out_dim, self.in_dim, T::one(), dy, &self.weights, T::zero(), dx);
    }
}

/// In-place ReLU; returns nothing, the output doubles as the backward mask.
pub fn relu_forward<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks the gradient where the forward output was clamped to zero.
pub fn relu_backward<T: Real>(y: &[T], dy: &mut [T]) {
    for (v, g) in y.iter().zip(dy) {
        if *v <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Batch-mean softmax cross-entropy over two logits per row. Returns the
/// loss and per-row class-1 probabilities; `dlogits` gets
/// `(softmax - onehot) / n`.
pub fn softmax_ce<T: Real>(
    logits: &[T],
    labels: &[bool],
    dlogits: Option<&mut [T]>,
) -> (T, Vec<T>) {
    let n = labels.len();
    debug_assert_eq!(logits.len(), 2 * n);
    let mut loss = T::zero();
    let mut probs = Vec::with_capacity(n);
    let inv_n = T::one() / T::of(n as f64);
    let mut grads = dlogits;
    for i in 0..n {
        let (a, b) = (logits[2 * i], logits[2 * i + 1]);
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let z = ea + eb;
        let (pa, pb) = (ea / z, eb / z);
        probs.push(pb);
        let p_label = if labels[i] { pb } else { pa };
        loss -= (p_label.max(T::of(1e-300))).ln() * inv_n;
        if let Some(d) = grads.as_deref_mut() {
            let (ta, tb) = if labels[i] { (T::zero(), T::one()) } else { (T::one(), T::zero()) };
            d[2 * i] = (pa - ta) * inv_n;
            d[2 * i + 1] = (pb - tb) * inv_n;
        }
    }
    (loss, probs)
}

/// Masked squared-error pose loss: the summed squared error of masked rows
/// divided by `max(1, masked count)`. With no masked row both the loss and
/// every gradient are exactly zero.
pub fn masked_squared_error<T: Real>(
    predictions: &[T],
    targets: &[T],
    mask: &[bool],
    dims: usize,
    dpred: Option<&mut [T]>,
) -> T {
    let n = mask.len();
    debug_assert_eq!(predictions.len(), n * dims);
    debug_assert_eq!(targets.len(), n * dims);
    let count = mask.iter().filter(|&&m| m).count();
    let denom = T::of(count.max(1) as f64);
    let mut loss = T::zero();
    let mut grads = dpred;
    if let Some(d) = grads.as_deref_mut() {
        d.fill(T::zero());
    }
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        for j in 0..dims {
            let e = predictions[i * dims + j] - targets[i * dims + j];
            loss += e * e / denom;
            if let Some(d) = grads.as_deref_mut() {
                d[i * dims + j] = (e + e) / denom;
            }
        }
    }
    loss
}
