//! Eye-contact detection from egocentric face patches.
//!
//! The library covers the full desk-scale pipeline:
//!
//! - [`synthface`]: a parametric face-patch generator with ground-truth gaze,
//!   head pose and a landmark-availability surrogate.
//! - [`imaging`]: patch containers, PGM/PPM codecs, bilinear warps, eye-patch
//!   alignment, HOG descriptors and label-preserving augmentation.
//! - [`picnn`]: a two-branch convolutional network trained jointly on
//!   eye-contact labels and head pose, with manual backprop and SGD.
//! - [`baselines`]: a pose-clustered HOG + random-forest detector and a
//!   PCA/MDA/SVM detector over raw eye intensities.
//! - [`eval`]: threshold sweeps (F1, MCC, AUC-PR), subject-disjoint folds,
//!   class rebalancing and dataset statistics.
//! - [`selection`]: online child-face selection across a detection stream.
//!
//! Math-heavy types are generic over the scalar via [`Real`] (implemented for
//! `f32` and `f64`); the crate root exports concrete aliases such as
//! [`Tensor64`] and [`PicnnModel32`]. Reference paths and tests use `f64`,
//! network training defaults to `f32` for speed.
//!
//! Everything is deterministic: a [`numerics::Rng`] seed fixes generated
//! datasets, trained models and evaluation reports byte for byte.

pub mod baselines;
pub mod classifiers;
pub mod dataset;
pub mod eval;
pub mod imaging;
pub mod numerics;
pub mod picnn;
pub mod plot;
pub mod posecluster;
pub mod selection;
pub mod synthface;

mod error;
mod real;

pub use error::{Error, Result};
pub use real::Real;

pub use numerics::{tags, Rng, Tensor};

/// Caps the global worker pool at `threads`. Call once, before any parallel
/// work; afterwards the pool is fixed and further calls fail.
pub fn limit_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool already started: {e}")))
}

/// `f64` tensor, the reference scalar for oracles and fitting code.
pub type Tensor64 = Tensor<f64>;
/// `f32` tensor, used on the network training path.
pub type Tensor32 = Tensor<f32>;

pub type PcaModel64 = numerics::PcaModel<f64>;
pub type MdaModel64 = numerics::MdaModel<f64>;
pub type GmmPoseModel64 = posecluster::GmmPoseModel<f64>;
pub type ForestModel64 = classifiers::ForestModel<f64>;
pub type LinearSvmModel64 = classifiers::LinearSvmModel<f64>;
pub type OnlineLogRegModel64 = classifiers::OnlineLogRegModel<f64>;
pub type PeecModel64 = baselines::PeecModel<f64>;
pub type GazeLockModel64 = baselines::GazeLockModel<f64>;
/// `f32` contact network, the training default.
pub type PicnnModel32 = picnn::PicnnModel<f32>;
/// `f64` contact network, used by gradient checks.
pub type PicnnModel64 = picnn::PicnnModel<f64>;
