//! Landmark-dependent reference detectors: pose-clustered forests over HOG
//! features, and a PCA/MDA/SVM pipeline over raw eye intensities.
//!
//! Both need detected eye centers, so they only score frames where landmarks
//! are available; the caller decides what a missing prediction means.

mod gazelock;
mod peec;

pub use gazelock::{fit_gazelock, GazeLockConfig, GazeLockModel};
pub use peec::{fit_peec, PeecConfig, PeecModel};

use crate::imaging::{align_eyes, EyePatch};
use crate::posecluster::HeadPose;
use crate::real::Real;
use crate::synthface::SynthSample;
use crate::Result;

/// One landmark-available frame prepared for baseline training: head pose,
/// the two aligned eye patches and the contact label.
#[derive(Debug, Clone)]
pub struct BaselineFrame {
    pub pose: HeadPose,
    pub left: EyePatch,
    pub right: EyePatch,
    pub label: bool,
}

impl BaselineFrame {
    /// Aligns the eyes of a generated sample. Fails if the sample has no
    /// usable landmarks, mirroring what a landmark detector would deliver.
    pub fn from_sample(sample: &SynthSample) -> Result<BaselineFrame> {
        let (left, right) = align_eyes(
            &sample.patch,
            sample.left_eye,
            sample.right_eye,
            sample.scene.roll,
        )?;
        Ok(BaselineFrame {
            pose: HeadPose::new(sample.scene.yaw, sample.scene.pitch, sample.scene.roll),
            left,
            right,
            label: sample.label,
        })
    }
}

/// Concatenated per-eye HOG descriptors, left then right.
pub fn hog_features<T: Real>(left: &EyePatch, right: &EyePatch) -> Vec<T> {
    let mut out: Vec<T> = crate::imaging::extract_hog(left).iter().map(|&v| T::of(v)).collect();
    out.extend(crate::imaging::extract_hog(right).iter().map(|&v| T::of(v)));
    out
}

/// Concatenated raw intensities scaled to [0, 1], left then right.
pub fn intensity_features<T: Real>(left: &EyePatch, right: &EyePatch) -> Vec<T> {
    let scale = T::of(1.0 / 255.0);
    left.pixels()
        .iter()
        .chain(right.pixels())
        .map(|&v| T::of(v as f64) * scale)
        .collect()
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
