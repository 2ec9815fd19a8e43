//! Appearance-only eye-contact detector: raw eye intensities through PCA,
//! a discriminant projection over contact-and-pose pseudo-classes, and a
//! linear SVM whose margin becomes a probability through a sigmoid.

use super::{intensity_features, sigmoid, BaselineFrame};
use crate::classifiers::{fit_linear_svm, LinearSvmConfig, LinearSvmModel};
use crate::numerics::{fit_mda, fit_pca, MdaModel, PcaModel};
use crate::numerics::{ModelIo, Packer, Rng, Tensor, Unpacker};
use crate::posecluster::{fit_gmm, HeadPose};
use crate::real::Real;
use crate::{tags, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GazeLockConfig {
    /// PCA dimensionality; clamped to the feasible maximum for small sets.
    pub pca_dims: usize,
    /// Pose clusters used to refine the discriminant pseudo-classes.
    pub pose_clusters: usize,
    pub svm: LinearSvmConfig,
}

impl Default for GazeLockConfig {
    fn default() -> Self {
        GazeLockConfig { pca_dims: 200, pose_clusters: 3, svm: LinearSvmConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct GazeLockModel<T: Real> {
    pca: PcaModel<T>,
    mda: MdaModel<T>,
    svm: LinearSvmModel<T>,
}

impl<T: Real> GazeLockModel<T> {
    pub fn pca_dims(&self) -> usize {
        self.pca.dims()
    }

    pub fn mda_dims(&self) -> usize {
        self.mda.dims()
    }

    /// Contact probability from the SVM margin in discriminant space.
    pub fn predict(&self, left: &crate::imaging::EyePatch, right: &crate::imaging::EyePatch) -> Result<T> {
        let x = intensity_features::<T>(left, right);
        let z = self.mda.project(&self.pca.project(&x)?)?;
        Ok(sigmoid(self.svm.decision(&z)?))
    }
}

impl<T: Real> ModelIo for GazeLockModel<T> {
    const TAG: u32 = tags::GAZELOCK;

    fn encode(&self, p: &mut Packer) {
        self.pca.encode(p);
        self.mda.encode(p);
        self.svm.encode(p);
    }

    fn decode(u: &mut Unpacker) -> Result<Self> {
        let pca = PcaModel::decode(u)?;
        let mda = MdaModel::decode(u)?;
        let svm = LinearSvmModel::decode(u)?;
        Ok(GazeLockModel { pca, mda, svm })
    }
}

/// Fits the three-stage pipeline. Pseudo-classes cross the contact label
/// with a head-pose cluster so the discriminant separates "contact while
/// frontal" from "contact while turned"; when the pose mixture cannot be
/// fitted or leaves a pseudo-class with fewer than two members, training
/// falls back to the plain two-class labels.
pub fn fit_gazelock<T: Real>(
    frames: &[BaselineFrame],
    config: &GazeLockConfig,
    rng: &mut Rng,
) -> Result<GazeLockModel<T>> {
    let n = frames.len();
    if n < 4 {
        return Err(Error::DegenerateInput(format!("{n} frames are too few to fit the pipeline")));
    }
    let d = 2 * 73 * 37;
    let mut features = Tensor::<T>::zeros(vec![n, d]);
    for (r, f) in frames.iter().enumerate() {
        features.row_mut(r).copy_from_slice(&intensity_features::<T>(&f.left, &f.right));
    }

    let pca_dims = config.pca_dims.min(n - 1).min(d);
    if pca_dims < config.pca_dims {
        log::warn!(
            "reducing PCA dimensionality from {} to {pca_dims} for {n} frames",
            config.pca_dims
        );
    }
    let pca = fit_pca(&features, pca_dims)?;
    let projected = pca.project_batch(&features)?;

    let labels: Vec<usize> = frames.iter().map(|f| f.label as usize).collect();
    let pseudo = pose_refined_labels(frames, config.pose_clusters, rng).unwrap_or_else(|| {
        log::warn!("pose clustering unusable; falling back to plain contact classes");
        labels.clone()
    });

    let class_count = {
        let mut distinct: Vec<usize> = pseudo.clone();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.len()
    };
    let mda = fit_mda(&projected, &pseudo, class_count - 1)?;

    let mut discriminant = Tensor::<T>::zeros(vec![n, mda.dims()]);
    for r in 0..n {
        let z = mda.project(projected.row(r))?;
        discriminant.row_mut(r).copy_from_slice(&z);
    }
    let contact: Vec<bool> = frames.iter().map(|f| f.label).collect();
    let svm = fit_linear_svm(&discriminant, &contact, &config.svm, rng)?;

    Ok(GazeLockModel { pca, mda, svm })
}

/// Crosses the contact label with a pose-cluster index. Returns None when
/// the mixture cannot be fitted or any resulting pseudo-class is too small
/// for discriminant fitting.
fn pose_refined_labels(
    frames: &[BaselineFrame],
    pose_clusters: usize,
    rng: &mut Rng,
) -> Option<Vec<usize>> {
    let poses: Vec<HeadPose> = frames.iter().map(|f| f.pose).collect();
    let (gmm, _) = fit_gmm::<f64>(&poses, pose_clusters, rng).ok()?;
    let pseudo: Vec<usize> = frames
        .iter()
        .map(|f| (f.label as usize) * pose_clusters + gmm.assign(&f.pose))
        .collect();

    let mut counts = vec![0usize; 2 * pose_clusters];
    for &c in &pseudo {
        counts[c] += 1;
    }
    let usable = counts.iter().filter(|&&c| c > 0).all(|&c| c >= 2)
        && counts.iter().filter(|&&c| c > 0).count() >= 2;
    usable.then_some(pseudo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::EyePatch;
    use crate::synthface::{generate_dataset, GeneratorConfig};

    fn generated_frames(sessions: usize, frames: usize, seed: u64) -> Vec<BaselineFrame> {
        let mut config = GeneratorConfig::base(sessions, frames);
        config.positive_rate = 0.3;
        generate_dataset(&config, seed)
            .unwrap()
            .iter()
            .filter(|s| s.landmark_available)
            .map(|s| BaselineFrame::from_sample(s).unwrap())
            .collect()
    }

    #[test]
    fn stage_dimensions_follow_the_data() {
        let frames = generated_frames(2, 40, 19);
        let n = frames.len();
        let mut rng = Rng::new(5);
        let model = fit_gazelock::<f64>(&frames, &GazeLockConfig::default(), &mut rng).unwrap();
        // Fewer than 201 frames clamp the PCA width; the discriminant can
        // never exceed pseudo-class count minus one = 5.
        assert_eq!(model.pca_dims(), 200.min(n - 1));
        assert!(model.mda_dims() <= 5, "mda dims {}", model.mda_dims());
        assert!(model.mda_dims() >= 1);
    }

    #[test]
    fn separates_contact_on_generated_sessions() {
        let frames = generated_frames(6, 80, 43);
        let mut rng = Rng::new(8);
        let model = fit_gazelock::<f64>(&frames, &GazeLockConfig::default(), &mut rng).unwrap();
        let mut pos = (0.0, 0);
        let mut neg = (0.0, 0);
        for f in &frames {
            let score = model.predict(&f.left, &f.right).unwrap();
            assert!((0.0..=1.0).contains(&score));
            if f.label {
                pos = (pos.0 + score, pos.1 + 1);
            } else {
                neg = (neg.0 + score, neg.1 + 1);
            }
        }
        let mean_pos = pos.0 / pos.1 as f64;
        let mean_neg = neg.0 / neg.1 as f64;
        assert!(
            mean_pos > mean_neg + 0.15,
            "positives {mean_pos:.3} vs negatives {mean_neg:.3}"
        );
    }

    #[test]
    fn uninformative_features_degrade_to_equal_scores() {
        // Constant eye patches carry no signal. PCA completes a basis over
        // the zero-variance input, the discriminant collapses, and every
        // frame gets the same score instead of an error.
        let blank = EyePatch::from_pixels(vec![100; 73 * 37]).unwrap();
        let mut rng = Rng::new(21);
        let frames: Vec<BaselineFrame> = (0..40)
            .map(|i| BaselineFrame {
                pose: HeadPose::new(rng.range_f64(-20.0, 20.0), rng.range_f64(-10.0, 10.0), 0.0),
                left: blank.clone(),
                right: blank.clone(),
                label: i % 5 == 0,
            })
            .collect();
        let model = fit_gazelock::<f64>(&frames, &GazeLockConfig::default(), &mut rng).unwrap();
        let first = model.predict(&frames[0].left, &frames[0].right).unwrap();
        for f in &frames {
            let score = model.predict(&f.left, &f.right).unwrap();
            assert_eq!(score, first);
        }
    }

    #[test]
    fn container_roundtrip_preserves_predictions() {
        let frames = generated_frames(2, 40, 61);
        let mut rng = Rng::new(2);
        let model = fit_gazelock::<f64>(&frames, &GazeLockConfig::default(), &mut rng).unwrap();
        let restored = GazeLockModel::<f64>::from_container(&model.to_container()).unwrap();
        for f in frames.iter().take(10) {
            assert_eq!(
                model.predict(&f.left, &f.right).unwrap(),
                restored.predict(&f.left, &f.right).unwrap()
            );
        }
    }

    #[test]
    fn too_few_frames_is_degenerate() {
        let frames = generated_frames(1, 60, 9);
        let mut rng = Rng::new(1);
        let err = fit_gazelock::<f64>(&frames[..3], &GazeLockConfig::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)), "{err:?}");
    }
}
