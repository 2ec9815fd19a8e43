//! Pose-clustered eye-contact detector: a head-pose mixture routes HOG
//! features to per-cluster random forests, and predictions blend the
//! cluster forests by pose responsibility.

use super::{hog_features, BaselineFrame};
use crate::classifiers::{fit_forest, ForestConfig, ForestModel};
use crate::numerics::{ModelIo, Packer, Rng, Tensor, Unpacker};
use crate::posecluster::{fit_gmm, GmmPoseModel, HeadPose};
use crate::real::Real;
use crate::{tags, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PeecConfig {
    pub clusters: usize,
    pub forest: ForestConfig,
}

impl Default for PeecConfig {
    fn default() -> Self {
        PeecConfig { clusters: 3, forest: ForestConfig::default() }
    }
}

/// Pose mixture plus one forest per component.
#[derive(Debug, Clone, PartialEq)]
pub struct PeecModel<T: Real> {
    gmm: GmmPoseModel<T>,
    forests: Vec<ForestModel<T>>,
}

impl<T: Real> PeecModel<T> {
    pub fn cluster_count(&self) -> usize {
        self.forests.len()
    }

    pub fn gmm(&self) -> &GmmPoseModel<T> {
        &self.gmm
    }

    /// Contact probability: the responsibility-weighted mean of the cluster
    /// forests, so a pose between clusters blends their opinions.
    pub fn predict(&self, pose: &HeadPose, left: &crate::imaging::EyePatch, right: &crate::imaging::EyePatch) -> Result<T> {
        let features = hog_features::<T>(left, right);
        let resp = self.gmm.responsibilities(pose);
        let mut score = T::zero();
        for (r, forest) in resp.iter().zip(&self.forests) {
            score += *r * forest.predict(&features)?;
        }
        Ok(score)
    }
}

impl<T: Real> ModelIo for PeecModel<T> {
    const TAG: u32 = tags::PEEC;

    fn encode(&self, p: &mut Packer) {
        p.push_usize(self.forests.len());
        self.gmm.encode(p);
        for forest in &self.forests {
            forest.encode(p);
        }
    }

    fn decode(u: &mut Unpacker) -> Result<Self> {
        let k = u.take_usize()?;
        let gmm = GmmPoseModel::decode(u)?;
        if gmm.component_count() != k {
            return Err(Error::Parse(format!(
                "mixture has {} components but {} forests are recorded",
                gmm.component_count(),
                k
            )));
        }
        let mut forests = Vec::with_capacity(k);
        for _ in 0..k {
            forests.push(ForestModel::decode(u)?);
        }
        Ok(PeecModel { gmm, forests })
    }
}

/// Fits the pose mixture, hard-assigns every frame to its most responsible
/// cluster and trains one forest per cluster. Every cluster must see both
/// classes; a cluster without positives (or negatives) cannot rank frames
/// and training refuses to paper over it.
pub fn fit_peec<T: Real>(
    frames: &[BaselineFrame],
    config: &PeecConfig,
    rng: &mut Rng,
) -> Result<PeecModel<T>> {
    if frames.len() < 2 * config.clusters {
        return Err(Error::DegenerateInput(format!(
            "{} frames cannot support {} pose clusters",
            frames.len(),
            config.clusters
        )));
    }
    let poses: Vec<HeadPose> = frames.iter().map(|f| f.pose).collect();
    let (gmm, _) = fit_gmm::<T>(&poses, config.clusters, rng)?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.clusters];
    for (i, pose) in poses.iter().enumerate() {
        members[gmm.assign(pose)].push(i);
    }

    let feature_dim = hog_features::<T>(&frames[0].left, &frames[0].right).len();
    let mut forests = Vec::with_capacity(config.clusters);
    for (c, rows) in members.iter().enumerate() {
        let positives = rows.iter().filter(|&&i| frames[i].label).count();
        if rows.len() < 2 || positives == 0 || positives == rows.len() {
            return Err(Error::DegenerateInput(format!(
                "pose cluster {c} has {} frames with {} positives; every cluster needs both classes",
                rows.len(),
                positives
            )));
        }
        let mut features = Tensor::<T>::zeros(vec![rows.len(), feature_dim]);
        let mut labels = Vec::with_capacity(rows.len());
        for (out_row, &i) in rows.iter().enumerate() {
            let f = hog_features::<T>(&frames[i].left, &frames[i].right);
            features.row_mut(out_row).copy_from_slice(&f);
            labels.push(frames[i].label);
        }
        forests.push(fit_forest(&features, &labels, &config.forest, rng)?);
    }

    Ok(PeecModel { gmm, forests })
}
