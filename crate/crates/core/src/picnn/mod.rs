//! Multi-task convolutional network for eye-contact scoring of face patches.
//!
//! The trunk is a five-convolution stack (7x7/s2, then 5x5 and three 3x3,
//! max-pooled after the first, second and fifth) feeding one shared fully
//! connected layer. Two small heads sit on top: a two-way contact classifier
//! and an optional three-value head-pose regressor whose targets are
//! degrees divided by [`POSE_SCALE`]. Channel counts scale from a fixed base
//! profile so the same topology runs full-size or desk-size.

mod layers;
pub mod train;
pub mod viz;

pub use layers::{masked_squared_error, softmax_ce};
pub use train::{train_picnn, TrainConfig, TrainEntry, TrainLogRow, TrainSet};

use crate::imaging::FacePatch;
use crate::numerics::{tags, ModelIo, Packer, Rng, Unpacker};
use crate::real::Real;
use crate::{Error, Result};
use layers::{
    maxpool_backward, maxpool_forward, relu_backward, relu_forward, ConvLayer, ConvSpec, FcLayer,
    PoolSpec,
};

/// Divisor mapping pose angles in degrees to regression targets.
pub const POSE_SCALE: f64 = 90.0;

/// Reference channel widths of the five convolutions at scale 1.
const CHANNEL_BASE: [usize; 5] = [96, 256, 384, 384, 256];
/// (kernel, stride, pad) of the five convolutions.
const CONV_GEOMETRY: [(usize, usize, usize); 5] = [(7, 2, 0), (5, 1, 2), (3, 1, 1), (3, 1, 1), (3, 1, 1)];
/// Convolutions followed by a 3x3/s2 max pool.
const POOLED: [bool; 5] = [true, true, false, false, true];

/// Substream ids that key the per-tensor weight initialization, so adding or
/// removing one branch never shifts the draws of another.
mod stream {
    pub const CONV_BASE: u64 = 1; // conv1..conv5 use 1..=5
    pub const FC6: u64 = 6;
    pub const FC7_EYE: u64 = 7;
    pub const FC8_EYE: u64 = 8;
    pub const FC7_POSE: u64 = 9;
    pub const FC8_POSE: u64 = 10;
}

/// Weight initialization: scaled-by-fan-in normal draws, or a fixed-width
/// Gaussian as used by the original full-size recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Normal with std `sqrt(2 / fan_in)`; the default, needed for signal to
    /// survive the narrow desk-size fan-ins.
    HeNormal,
    /// Normal with std 0.01 regardless of fan-in.
    Gaussian,
}

/// Network shape hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicnnConfig {
    /// Square input side in pixels.
    pub input_size: usize,
    /// Multiplier on the base channel profile (96, 256, 384, 384, 256).
    pub channel_scale: f64,
    /// Width of the shared and per-head fully connected layers.
    pub fc_dim: usize,
    /// Whether to build the auxiliary head-pose regression head.
    pub pose_branch: bool,
    pub init: InitScheme,
}

impl PicnnConfig {
    /// Quarter-width network on 64x64 inputs; the configuration used for
    /// interactive-scale training.
    pub fn desk() -> Self {
        PicnnConfig {
            input_size: 64,
            channel_scale: 0.25,
            fc_dim: 128,
            pose_branch: true,
            init: InitScheme::HeNormal,
        }
    }

    /// Eighth-width network on 48x48 inputs, for quick experiments where
    /// many models are trained.
    pub fn desk_small() -> Self {
        PicnnConfig {
            input_size: 48,
            channel_scale: 0.125,
            fc_dim: 64,
            pose_branch: true,
            init: InitScheme::HeNormal,
        }
    }

    /// Full-size network on 227x227 inputs with 4096-wide dense layers.
    pub fn full() -> Self {
        PicnnConfig {
            input_size: 227,
            channel_scale: 1.0,
            fc_dim: 4096,
            pose_branch: true,
            init: InitScheme::Gaussian,
        }
    }

    /// Per-convolution output channel counts at this scale.
    pub fn channels(&self) -> [usize; 5] {
        let mut out = [0; 5];
        for (slot, base) in out.iter_mut().zip(CHANNEL_BASE) {
            *slot = ((base as f64 * self.channel_scale).round() as usize).max(1);
        }
        out
    }

    /// Resolves the concrete layer geometry, or fails when the input is too
    /// small for the fixed kernel/pool chain.
    pub fn layout(&self) -> Result<Layout> {
        if self.fc_dim == 0 {
            return Err(Error::Config("fc_dim must be positive".into()));
        }
        let channels = self.channels();
        let (mut h, mut w, mut c) = (self.input_size, self.input_size, 3);
        let mut convs = Vec::with_capacity(5);
        let mut pools = Vec::with_capacity(5);
        for i in 0..5 {
            let (k, stride, pad) = CONV_GEOMETRY[i];
            let spec = ConvSpec {
                in_channels: c,
                in_h: h,
                in_w: w,
                out_channels: channels[i],
                k,
                stride,
                pad,
            };
            if !spec.valid() {
                return Err(Error::Config(format!(
                    "input size {} is too small: convolution {} would see {}x{}",
                    self.input_size,
                    i + 1,
                    h,
                    w
                )));
            }
            h = spec.out_h();
            w = spec.out_w();
            c = spec.out_channels;
            convs.push(spec);
            if POOLED[i] {
                if h < 3 || w < 3 {
                    return Err(Error::Config(format!(
                        "input size {} is too small: pool after convolution {} would see {}x{}",
                        self.input_size,
                        i + 1,
                        h,
                        w
                    )));
                }
                let pool = PoolSpec { channels: c, in_h: h, in_w: w, k: 3, stride: 2 };
                h = pool.out_h();
                w = pool.out_w();
                pools.push(Some(pool));
            } else {
                pools.push(None);
            }
        }
        Ok(Layout { convs, pools, fc_in: c * h * w })
    }
}

/// Concrete per-layer geometry resolved from a [`PicnnConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub convs: Vec<ConvSpec>,
    pub pools: Vec<Option<PoolSpec>>,
    pub fc_in: usize,
}

impl Layout {
    /// Scratch length that fits the column matrix of every convolution.
    fn col_len(&self) -> usize {
        self.convs.iter().map(|s| s.patch_len() * s.out_h() * s.out_w()).max().unwrap_or(0)
    }

    /// Activation floats per sample across all cached stages; used to pick
    /// inference chunk sizes.
    fn acts_per_sample(&self) -> usize {
        let mut total = 3 * self.convs[0].in_h * self.convs[0].in_w;
        for (spec, pool) in self.convs.iter().zip(&self.pools) {
            total += spec.out_len();
            if let Some(p) = pool {
                total += p.out_len();
            }
        }
        total
    }
}

/// The pose regression head: one hidden layer and a three-output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseHead<T: Real> {
    pub fc7: FcLayer<T>,
    pub fc8: FcLayer<T>,
}

/// The full network. Weight layouts are documented on [`ConvLayer`] and
/// [`FcLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct PicnnModel<T: Real> {
    pub config: PicnnConfig,
    pub layout: Layout,
    pub convs: Vec<ConvLayer<T>>,
    pub fc6: FcLayer<T>,
    pub fc7e: FcLayer<T>,
    pub fc8e: FcLayer<T>,
    pub pose_head: Option<PoseHead<T>>,
}

fn init_slice<T: Real>(slice: &mut [T], std: f64, rng: &mut Rng) {
    for v in slice {
        *v = T::of(std * rng.next_normal());
    }
}

impl<T: Real> PicnnModel<T> {
    /// Builds the network with all weights zero; used by tests and decode.
    pub fn zeroed(config: PicnnConfig) -> Result<Self> {
        let layout = config.layout()?;
        let convs = layout.convs.iter().map(|&spec| ConvLayer::zeros(spec)).collect();
        let fc6 = FcLayer::zeros(layout.fc_in, config.fc_dim);
        let fc7e = FcLayer::zeros(config.fc_dim, config.fc_dim);
        let fc8e = FcLayer::zeros(config.fc_dim, 2);
        let pose_head = config.pose_branch.then(|| PoseHead {
            fc7: FcLayer::zeros(config.fc_dim, config.fc_dim),
            fc8: FcLayer::zeros(config.fc_dim, 3),
        });
        Ok(PicnnModel { config, layout, convs, fc6, fc7e, fc8e, pose_head })
    }

    /// Random initialization. Each tensor draws from its own substream of
    /// `rng`, keyed by a fixed per-layer id, so two models built from the
    /// same seed agree exactly on every layer they share. Biases start at
    /// zero.
    pub fn init(config: PicnnConfig, rng: &Rng) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        let std_for = |fan_in: usize| match config.init {
            InitScheme::HeNormal => (2.0 / fan_in as f64).sqrt(),
            InitScheme::Gaussian => 0.01,
        };
        for (i, conv) in model.convs.iter_mut().enumerate() {
            let mut r = rng.substream(stream::CONV_BASE + i as u64);
            init_slice(&mut conv.weights, std_for(conv.spec.patch_len()), &mut r);
        }
        let fc_streams: [(&mut FcLayer<T>, u64); 3] = [
            (&mut model.fc6, stream::FC6),
            (&mut model.fc7e, stream::FC7_EYE),
            (&mut model.fc8e, stream::FC8_EYE),
        ];
        for (layer, id) in fc_streams {
            let mut r = rng.substream(id);
            init_slice(&mut layer.weights, std_for(layer.in_dim), &mut r);
        }
        if let Some(head) = model.pose_head.as_mut() {
            let mut r = rng.substream(stream::FC7_POSE);
            init_slice(&mut head.fc7.weights, std_for(head.fc7.in_dim), &mut r);
            let mut r = rng.substream(stream::FC8_POSE);
            init_slice(&mut head.fc8.weights, std_for(head.fc8.in_dim), &mut r);
        }
        Ok(model)
    }

    pub fn input_len(&self) -> usize {
        3 * self.config.input_size * self.config.input_size
    }

    /// Converts a patch to network input planes (R, G, B; each value / 255),
    /// resizing if the patch is not already `input_size` square. Grayscale
    /// patches are replicated across the three planes.
    pub fn write_input(&self, patch: &FacePatch, out: &mut [T]) -> Result<()> {
        let s = self.config.input_size;
        if out.len() != 3 * s * s {
            return Err(Error::ShapeMismatch(format!(
                "input buffer wants {} values, got {}",
                3 * s * s,
                out.len()
            )));
        }
        let resized;
        let src = if patch.width() == s && patch.height() == s {
            patch
        } else {
            resized = patch.resize(s, s)?;
            &resized
        };
        let chans = src.channels();
        for c in 0..3 {
            let sc = c.min(chans - 1);
            for y in 0..s {
                for x in 0..s {
                    out[(c * s + y) * s + x] = T::of(src.get(x, y, sc) as f64 / 255.0);
                }
            }
        }
        Ok(())
    }

    /// Runs the network on a batch and keeps every intermediate activation
    /// for the backward pass. `input` is `[n, 3, s, s]` flattened.
    pub fn forward_train(&self, input: &[T], n: usize) -> ForwardCache<T> {
        assert_eq!(input.len(), n * self.input_len(), "input batch size mismatch");
        let layout = &self.layout;
        let mut col = vec![T::zero(); layout.col_len()];
        let mut conv_out: Vec<Vec<T>> = Vec::with_capacity(5);
        let mut pool_out: Vec<Vec<T>> = Vec::with_capacity(5);
        let mut argmax: Vec<Vec<u32>> = Vec::with_capacity(5);
        for (i, conv) in self.convs.iter().enumerate() {
            let mut y = vec![T::zero(); n * conv.spec.out_len()];
            let need = conv.spec.patch_len() * conv.spec.out_h() * conv.spec.out_w();
            {
                let src: &[T] = if i == 0 {
                    input
                } else if pool_out[i - 1].is_empty() {
                    &conv_out[i - 1]
                } else {
                    &pool_out[i - 1]
                };
                conv.forward(src, n, &mut col[..need], &mut y);
            }
            relu_forward(&mut y);
            conv_out.push(y);
            if let Some(pool) = &layout.pools[i] {
                let mut p = vec![T::zero(); n * pool.out_len()];
                let mut am = vec![0u32; p.len()];
                maxpool_forward(&conv_out[i], n, pool, &mut p, &mut am);
                pool_out.push(p);
                argmax.push(am);
            } else {
                pool_out.push(Vec::new());
                argmax.push(Vec::new());
            }
        }
        let flat: &[T] = if pool_out[4].is_empty() { &conv_out[4] } else { &pool_out[4] };
        let mut fc6_out = vec![T::zero(); n * self.config.fc_dim];
        self.fc6.forward(flat, n, &mut fc6_out);
        relu_forward(&mut fc6_out);
        let mut fc7e_out = vec![T::zero(); n * self.config.fc_dim];
        self.fc7e.forward(&fc6_out, n, &mut fc7e_out);
        relu_forward(&mut fc7e_out);
        let mut logits = vec![T::zero(); n * 2];
        self.fc8e.forward(&fc7e_out, n, &mut logits);
        let (fc7p_out, pose) = if let Some(head) = &self.pose_head {
            let mut h7 = vec![T::zero(); n * self.config.fc_dim];
            head.fc7.forward(&fc6_out, n, &mut h7);
            relu_forward(&mut h7);
            let mut p = vec![T::zero(); n * 3];
            head.fc8.forward(&h7, n, &mut p);
            (h7, p)
        } else {
            (Vec::new(), Vec::new())
        };
        ForwardCache { n, input: input.to_vec(), conv_out, pool_out, argmax, fc6_out, fc7e_out, logits, fc7p_out, pose }
    }

    /// Backward pass from head gradients to parameter gradients. `dpose` is
    /// the gradient on the raw pose outputs; passing `None` skips the pose
    /// head entirely, leaving its gradient slots zero and adding nothing —
    /// not even zeros — to the shared trunk.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &[T], dpose: Option<&[T]>) -> PicnnGrads<T> {
        let n = cache.n;
        assert_eq!(dlogits.len(), n * 2, "logit gradient batch mismatch");
        let mut grads = PicnnGrads::zeros_like(self);
        let fc_dim = self.config.fc_dim;

        let mut dfc7e = vec![T::zero(); n * fc_dim];
        self.fc8e.backward(&cache.fc7e_out, dlogits, n, &mut grads.fc8e.w, &mut grads.fc8e.b, &mut dfc7e);
        relu_backward(&cache.fc7e_out, &mut dfc7e);
        let mut dfc6 = vec![T::zero(); n * fc_dim];
        self.fc7e.backward(&cache.fc6_out, &dfc7e, n, &mut grads.fc7e.w, &mut grads.fc7e.b, &mut dfc6);

        if let (Some(dp), Some(head)) = (dpose, &self.pose_head) {
            assert_eq!(dp.len(), n * 3, "pose gradient batch mismatch");
            let pose_grads = grads.pose.as_mut().unwrap();
            let mut dfc7p = vec![T::zero(); n * fc_dim];
            head.fc8.backward(&cache.fc7p_out, dp, n, &mut pose_grads.1.w, &mut pose_grads.1.b, &mut dfc7p);
            relu_backward(&cache.fc7p_out, &mut dfc7p);
            let mut dfc6_pose = vec![T::zero(); n * fc_dim];
            head.fc7.backward(&cache.fc6_out, &dfc7p, n, &mut pose_grads.0.w, &mut pose_grads.0.b, &mut dfc6_pose);
            for (a, b) in dfc6.iter_mut().zip(&dfc6_pose) {
                *a += *b;
            }
        }

        relu_backward(&cache.fc6_out, &mut dfc6);
        let flat = cache.stage_output(4);
        let mut dcur = vec![T::zero(); flat.len()];
        self.fc6.backward(flat, &dfc6, n, &mut grads.fc6.w, &mut grads.fc6.b, &mut dcur);

        let mut col = vec![T::zero(); self.layout.col_len()];
        let mut dcol = vec![T::zero(); self.layout.col_len()];
        for i in (0..5).rev() {
            let conv = &self.convs[i];
            let mut dconv = if let Some(pool) = &self.layout.pools[i] {
                let mut d = vec![T::zero(); n * pool.in_len()];
                maxpool_backward(&dcur, n, pool, &cache.argmax[i], &mut d);
                d
            } else {
                dcur
            };
            relu_backward(&cache.conv_out[i], &mut dconv);
            let below = if i == 0 { cache.input.as_slice() } else { cache.stage_output(i - 1) };
            let mut dx = vec![T::zero(); below.len()];
            let need = conv.spec.patch_len() * conv.spec.out_h() * conv.spec.out_w();
            let LayerGrad { w: dw, b: db } = &mut grads.convs[i];
            conv.backward(below, &dconv, n, &mut col[..need], &mut dcol[..need], dw, db, &mut dx);
            dcur = dx;
        }
        grads
    }

    /// Contact probabilities (class-1 softmax) for a prepared input batch.
    pub fn contact_probabilities(&self, input: &[T], n: usize) -> Vec<T> {
        let chunk = self.inference_chunk();
        let mut out = Vec::with_capacity(n);
        let len = self.input_len();
        let mut start = 0;
        while start < n {
            let m = chunk.min(n - start);
            let cache = self.forward_train(&input[start * len..(start + m) * len], m);
            for i in 0..m {
                let (a, b) = (cache.logits[2 * i], cache.logits[2 * i + 1]);
                let mx = a.max(b);
                let (ea, eb) = ((a - mx).exp(), (b - mx).exp());
                out.push(eb / (ea + eb));
            }
            start += m;
        }
        out
    }

    /// Contact probabilities straight from patches, resizing as needed.
    pub fn predict_patches(&self, patches: &[FacePatch]) -> Result<Vec<T>> {
        let len = self.input_len();
        let chunk = self.inference_chunk();
        let mut out = Vec::with_capacity(patches.len());
        let mut buf = vec![T::zero(); chunk * len];
        for group in patches.chunks(chunk) {
            for (i, p) in group.iter().enumerate() {
                self.write_input(p, &mut buf[i * len..(i + 1) * len])?;
            }
            out.extend(self.contact_probabilities(&buf[..group.len() * len], group.len()));
        }
        Ok(out)
    }

    /// Predicted head pose in degrees for a prepared input batch, or `None`
    /// when the network was built without the pose head.
    pub fn pose_degrees(&self, input: &[T], n: usize) -> Option<Vec<T>> {
        self.pose_head.as_ref()?;
        let cache = self.forward_train(input, n);
        Some(cache.pose.iter().map(|&v| v * T::of(POSE_SCALE)).collect())
    }

    /// Batch size that keeps cached activations near 256 MiB of f64.
    fn inference_chunk(&self) -> usize {
        let per = self.layout.acts_per_sample().max(1);
        ((32 << 20) / per).clamp(1, 256)
    }

    /// All parameter tensors in a fixed traversal order (each layer's
    /// weights then bias); the same order as [`PicnnGrads::tensors`].
    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::with_capacity(self.convs.len() * 2 + 10);
        for conv in &mut self.convs {
            out.push(&mut conv.weights);
            out.push(&mut conv.bias);
        }
        for fc in [&mut self.fc6, &mut self.fc7e, &mut self.fc8e] {
            out.push(&mut fc.weights);
            out.push(&mut fc.bias);
        }
        if let Some(head) = self.pose_head.as_mut() {
            for fc in [&mut head.fc7, &mut head.fc8] {
                out.push(&mut fc.weights);
                out.push(&mut fc.bias);
            }
        }
        out
    }

    /// Read-only view of the same tensors, in the same order.
    pub fn param_tensors(&self) -> Vec<&Vec<T>> {
        let mut out = Vec::with_capacity(self.convs.len() * 2 + 10);
        for conv in &self.convs {
            out.push(&conv.weights);
            out.push(&conv.bias);
        }
        for fc in [&self.fc6, &self.fc7e, &self.fc8e] {
            out.push(&fc.weights);
            out.push(&fc.bias);
        }
        if let Some(head) = self.pose_head.as_ref() {
            for fc in [&head.fc7, &head.fc8] {
                out.push(&fc.weights);
                out.push(&fc.bias);
            }
        }
        out
    }
}

/// Cached activations from [`PicnnModel::forward_train`].
pub struct ForwardCache<T: Real> {
    n: usize,
    input: Vec<T>,
    conv_out: Vec<Vec<T>>,
    pool_out: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
    fc6_out: Vec<T>,
    fc7e_out: Vec<T>,
    /// Contact logits, two per sample.
    pub logits: Vec<T>,
    fc7p_out: Vec<T>,
    /// Raw pose outputs, three per sample; empty without the pose head.
    pub pose: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    /// Output of stage `i` after its pool if one exists.
    fn stage_output(&self, i: usize) -> &[T] {
        if self.pool_out[i].is_empty() {
            &self.conv_out[i]
        } else {
            &self.pool_out[i]
        }
    }
}

/// Per-layer weight and bias gradients.
#[derive(Debug, Clone)]
pub struct LayerGrad<T: Real> {
    pub w: Vec<T>,
    pub b: Vec<T>,
}

/// Gradient tensors mirroring a model's parameters.
#[derive(Debug, Clone)]
pub struct PicnnGrads<T: Real> {
    pub convs: Vec<LayerGrad<T>>,
    pub fc6: LayerGrad<T>,
    pub fc7e: LayerGrad<T>,
    pub fc8e: LayerGrad<T>,
    /// `(fc7, fc8)` of the pose head, present iff the model has one.
    pub pose: Option<(LayerGrad<T>, LayerGrad<T>)>,
}

fn zeros_like<T: Real>(layer_w: usize, layer_b: usize) -> LayerGrad<T> {
    LayerGrad { w: vec![T::zero(); layer_w], b: vec![T::zero(); layer_b] }
}

impl<T: Real> PicnnGrads<T> {
    pub fn zeros_like(model: &PicnnModel<T>) -> Self {
        PicnnGrads {
            convs: model
                .convs
                .iter()
                .map(|c| zeros_like(c.weights.len(), c.bias.len()))
                .collect(),
            fc6: zeros_like(model.fc6.weights.len(), model.fc6.bias.len()),
            fc7e: zeros_like(model.fc7e.weights.len(), model.fc7e.bias.len()),
            fc8e: zeros_like(model.fc8e.weights.len(), model.fc8e.bias.len()),
            pose: model.pose_head.as_ref().map(|h| {
                (
                    zeros_like(h.fc7.weights.len(), h.fc7.bias.len()),
                    zeros_like(h.fc8.weights.len(), h.fc8.bias.len()),
                )
            }),
        }
    }

    /// Gradient tensors in the order of [`PicnnModel::param_tensors_mut`].
    pub fn tensors(&self) -> Vec<&Vec<T>> {
        let mut out = Vec::with_capacity(self.convs.len() * 2 + 10);
        for g in &self.convs {
            out.push(&g.w);
            out.push(&g.b);
        }
        for g in [&self.fc6, &self.fc7e, &self.fc8e] {
            out.push(&g.w);
            out.push(&g.b);
        }
        if let Some((fc7, fc8)) = self.pose.as_ref() {
            for g in [fc7, fc8] {
                out.push(&g.w);
                out.push(&g.b);
            }
        }
        out
    }
}

impl<T: Real> ModelIo for PicnnModel<T> {
    const TAG: u32 = tags::PICNN;

    fn encode(&self, p: &mut Packer) {
        p.push_usize(self.config.input_size);
        p.push(self.config.channel_scale);
        p.push_usize(self.config.fc_dim);
        p.push(if self.config.pose_branch { 1.0 } else { 0.0 });
        p.push(match self.config.init {
            InitScheme::HeNormal => 0.0,
            InitScheme::Gaussian => 1.0,
        });
        let tensors = self.param_tensors();
        p.push_usize(tensors.len());
        for t in tensors {
            p.push_usize(t.len());
            for v in t {
                p.push(v.as_f64());
            }
        }
    }

    fn decode(u: &mut Unpacker) -> Result<Self> {
        let input_size = u.take_usize()?;
        let channel_scale = u.take()?;
        let fc_dim = u.take_usize()?;
        let pose_branch = u.take()? != 0.0;
        let init = match u.take()? {
            v if v == 0.0 => InitScheme::HeNormal,
            v if v == 1.0 => InitScheme::Gaussian,
            v => return Err(Error::Parse(format!("unknown init scheme code {v}"))),
        };
        let config = PicnnConfig { input_size, channel_scale, fc_dim, pose_branch, init };
        let mut model = PicnnModel::<T>::zeroed(config)?;
        let mut tensors = model.param_tensors_mut();
        let stored = u.take_usize()?;
        if stored != tensors.len() {
            return Err(Error::Parse(format!(
                "model stores {stored} tensors, the configuration implies {}",
                tensors.len()
            )));
        }
        for t in tensors.iter_mut() {
            let len = u.take_usize()?;
            if len != t.len() {
                return Err(Error::Parse(format!("tensor length {len} does not match shape {}", t.len())));
            }
            for v in t.iter_mut() {
                *v = T::of(u.take()?);
            }
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use std::path::Path;

    fn tiny_config() -> PicnnConfig {
        // Smallest input the fixed conv/pool chain accepts: 35 -> 15 -> 7
        // (pool) -> 7 -> 3 (pool) -> 3 -> 3 -> 3 -> 1 (pool).
        PicnnConfig {
            input_size: 35,
            channel_scale: 0.02,
            fc_dim: 6,
            pose_branch: true,
            init: InitScheme::HeNormal,
        }
    }

    #[test]
    fn layout_matches_hand_computed_shapes() {
        let desk = PicnnConfig::desk().layout().unwrap();
        // 64 -(7/s2)-> 29 -pool-> 14 -(5/p2)-> 14 -pool-> 6 -> 6 -> 6 -> 6 -pool-> 2
        let heights: Vec<usize> = desk.convs.iter().map(|s| s.in_h).collect();
        assert_eq!(heights, vec![64, 14, 6, 6, 6]);
        assert_eq!(desk.convs[4].out_h(), 6);
        assert_eq!(desk.pools[4].as_ref().unwrap().out_h(), 2);
        let channels: Vec<usize> = desk.convs.iter().map(|s| s.out_channels).collect();
        assert_eq!(channels, vec![24, 64, 96, 96, 64]);
        // 2 * 2 * 64
        assert_eq!(desk.fc_in, 256);

        let small = PicnnConfig::desk_small().layout().unwrap();
        let heights: Vec<usize> = small.convs.iter().map(|s| s.in_h).collect();
        assert_eq!(heights, vec![48, 10, 4, 4, 4]);
        assert_eq!(small.pools[4].as_ref().unwrap().out_h(), 1);
        let channels: Vec<usize> = small.convs.iter().map(|s| s.out_channels).collect();
        assert_eq!(channels, vec![12, 32, 48, 48, 32]);
        // 1 * 1 * 32
        assert_eq!(small.fc_in, 32);

        let full = PicnnConfig::full().layout().unwrap();
        let heights: Vec<usize> = full.convs.iter().map(|s| s.in_h).collect();
        assert_eq!(heights, vec![227, 55, 27, 27, 27]);
        // 13 * 13 * 256
        assert_eq!(full.fc_in, 43264);
    }

    #[test]
    fn too_small_inputs_are_rejected() {
        let config = PicnnConfig { input_size: 20, ..PicnnConfig::desk() };
        assert!(config.layout().is_err());
        let config = PicnnConfig { fc_dim: 0, ..PicnnConfig::desk() };
        assert!(config.layout().is_err());
    }

    #[test]
    fn zero_network_losses_take_their_closed_forms() {
        let model = PicnnModel::<f64>::zeroed(tiny_config()).unwrap();
        let n = 4;
        let input = vec![0.37; n * model.input_len()];
        let cache = model.forward_train(&input, n);
        assert!(cache.logits.iter().all(|&v| v == 0.0));
        let labels = vec![true, false, true, false];
        let (ce, probs) = softmax_ce(&cache.logits, &labels, None);
        // Uniform two-way softmax: -ln(1/2).
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(probs.iter().all(|&p| p == 0.5));

        // Pose outputs are zero, so the masked error is the mean squared
        // target norm: all targets (0.1, 0, 0) give exactly 0.01, and the
        // combined loss with weight 0.1 is ln 2 + 0.001.
        let targets: Vec<f64> = (0..n).flat_map(|_| [0.1, 0.0, 0.0]).collect();
        let mask = vec![true; n];
        let pose = masked_squared_error(&cache.pose, &targets, &mask, 3, None);
        assert!((pose - 0.01).abs() < 1e-15);
        let total = ce + 0.1 * pose;
        assert!((total - 0.6941471805599453).abs() < 1e-12);
    }

    #[test]
    fn whole_network_gradients_match_finite_differences() {
        let config = tiny_config();
        let rng = Rng::new(902);
        let mut model = PicnnModel::<f64>::init(config, &rng).unwrap();
        let n = 3;
        let mut data_rng = Rng::new(55);
        let input: Vec<f64> = (0..n * model.input_len()).map(|_| data_rng.next_f64()).collect();
        let labels = vec![true, false, true];
        let targets: Vec<f64> = (0..3 * n).map(|_| data_rng.next_f64() - 0.5).collect();
        let mask = vec![true, false, true];
        let lambda = 0.3;

        let loss_of = |m: &PicnnModel<f64>| {
            let cache = m.forward_train(&input, n);
            let (ce, _) = softmax_ce(&cache.logits, &labels, None);
            let pose = masked_squared_error(&cache.pose, &targets, &mask, 3, None);
            ce + lambda * pose
        };

        let cache = model.forward_train(&input, n);
        let mut dlogits = vec![0.0; 2 * n];
        softmax_ce(&cache.logits, &labels, Some(&mut dlogits));
        let mut dpose = vec![0.0; 3 * n];
        masked_squared_error(&cache.pose, &targets, &mask, 3, Some(&mut dpose));
        for g in dpose.iter_mut() {
            *g *= lambda;
        }
        let grads = model.backward(&cache, &dlogits, Some(&dpose));
        let grad_tensors: Vec<Vec<f64>> = grads.tensors().into_iter().cloned().collect();

        let step = 1e-5;
        let mut checked = 0usize;
        for ti in 0..grad_tensors.len() {
            let len = grad_tensors[ti].len();
            // Probe a spread of indices in every tensor.
            let stride = (len / 6).max(1);
            for idx in (0..len).step_by(stride) {
                let orig = *model.param_tensors()[ti].get(idx).unwrap();
                model.param_tensors_mut()[ti][idx] = orig + step;
                let up = loss_of(&model);
                model.param_tensors_mut()[ti][idx] = orig - step;
                let down = loss_of(&model);
                model.param_tensors_mut()[ti][idx] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = grad_tensors[ti][idx];
                let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
                assert!(rel < 1e-4, "tensor {ti} index {idx}: analytic {analytic} vs numeric {numeric}");
                checked += 1;
            }
        }
        assert!(checked > 100, "the probe should cover a meaningful number of parameters");
    }

    #[test]
    fn shared_layers_initialize_identically_with_and_without_pose_head() {
        let rng = Rng::new(33);
        let with = PicnnModel::<f64>::init(tiny_config(), &rng).unwrap();
        let without =
            PicnnModel::<f64>::init(PicnnConfig { pose_branch: false, ..tiny_config() }, &rng).unwrap();
        for (a, b) in with.convs.iter().zip(&without.convs) {
            assert_eq!(a.weights, b.weights);
        }
        assert_eq!(with.fc6.weights, without.fc6.weights);
        assert_eq!(with.fc7e.weights, without.fc7e.weights);
        assert_eq!(with.fc8e.weights, without.fc8e.weights);
        assert!(without.pose_head.is_none());
    }

    #[test]
    fn probabilities_are_valid_and_batch_invariant() {
        let rng = Rng::new(77);
        let model = PicnnModel::<f64>::init(tiny_config(), &rng).unwrap();
        let n = 5;
        let mut data_rng = Rng::new(3);
        let input: Vec<f64> = (0..n * model.input_len()).map(|_| data_rng.next_f64()).collect();
        let batch = model.contact_probabilities(&input, n);
        assert_eq!(batch.len(), n);
        for (i, p) in batch.iter().enumerate() {
            assert!(*p > 0.0 && *p < 1.0, "probability {p} out of range");
            let single = model.contact_probabilities(&input[i * model.input_len()..(i + 1) * model.input_len()], 1);
            assert!((single[0] - p).abs() < 1e-12, "sample {i} differs run alone");
        }
    }

    #[test]
    fn pose_outputs_scale_to_degrees() {
        let rng = Rng::new(12);
        let model = PicnnModel::<f64>::init(tiny_config(), &rng).unwrap();
        let input = vec![0.5; model.input_len()];
        let cache = model.forward_train(&input, 1);
        let deg = model.pose_degrees(&input, 1).unwrap();
        for (raw, d) in cache.pose.iter().zip(&deg) {
            assert!((raw * 90.0 - d).abs() < 1e-12);
        }
        let headless =
            PicnnModel::<f64>::init(PicnnConfig { pose_branch: false, ..tiny_config() }, &rng).unwrap();
        assert!(headless.pose_degrees(&input, 1).is_none());
    }

    #[test]
    fn patches_of_any_size_and_color_are_accepted() {
        let rng = Rng::new(91);
        let model = PicnnModel::<f64>::init(tiny_config(), &rng).unwrap();
        let rgb = FacePatch::filled(50, 40, 3, 128).unwrap();
        let gray = FacePatch::filled(35, 35, 1, 128).unwrap();
        let scores = model.predict_patches(&[rgb, gray]).unwrap();
        assert_eq!(scores.len(), 2);
        assert!(scores.iter().all(|p| *p > 0.0 && *p < 1.0));
    }

    #[test]
    fn saved_models_restore_their_predictions_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path: &Path = &dir.path().join("net.gcm");
        let rng = Rng::new(40);
        let model = PicnnModel::<f32>::init(tiny_config(), &rng).unwrap();
        model.save(path).unwrap();
        let restored = PicnnModel::<f32>::load(path).unwrap();
        assert_eq!(restored.config, model.config);
        let input: Vec<f32> = (0..2 * model.input_len()).map(|i| (i % 97) as f32 / 97.0).collect();
        assert_eq!(model.contact_probabilities(&input, 2), restored.contact_probabilities(&input, 2));
    }
}
