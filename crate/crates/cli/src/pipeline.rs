//! Shared plumbing between the subcommands: trainable method dispatch,
//! model files of any type, manifest scoring and landmark lookup.

use crate::config::RunConfig;
use eyecontact::baselines::{
    fit_gazelock, fit_peec, BaselineFrame, GazeLockConfig, GazeLockModel, PeecConfig, PeecModel,
};
use eyecontact::dataset::{self, LandmarkRow, Manifest, ManifestRow, ScoreRow};
use eyecontact::eval::rebalance_entries;
use eyecontact::imaging::{align_eyes, AugmentRanges, FacePatch, Point2};
use eyecontact::numerics::{Container, ModelIo, Rng};
use eyecontact::picnn::{train_picnn, PicnnConfig, TrainConfig, TrainEntry, TrainLogRow, TrainSet};
use eyecontact::posecluster::HeadPose;
use eyecontact::{tags, Error, PicnnModel32, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Substream ids for the per-command master generator, so the independent
/// stages of a run never share random draws.
mod stream {
    pub const REBALANCE: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const FIT: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TrainMethod {
    /// Multi-task network: contact classification plus pose regression.
    Picnn,
    /// The same network with the pose branch removed.
    Alexnet,
    /// Pose-clustered forests over eye HOG features.
    Peec,
    /// PCA + discriminant projection + linear SVM over eye intensities.
    Gazelock,
}

/// Everything a training run needs beyond the data, resolved from the run
/// configuration with library defaults.
#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub picnn: PicnnConfig,
    pub train: TrainConfig,
    pub rebalance: bool,
    pub target_positive_rate: f64,
    pub peec: PeecConfig,
    pub gazelock: GazeLockConfig,
}

/// Consumes the `train.*`, `picnn.*`, `peec.*` and `gazelock.*` keys. All
/// method namespaces are always read so one config file can serve several
/// methods without tripping the unknown-key check.
pub fn train_settings(config: &mut RunConfig, method: TrainMethod) -> Result<TrainSettings> {
    let mut picnn = match config.take_or("picnn.preset", "desk".to_string())?.as_str() {
        "desk" => PicnnConfig::desk(),
        "desk_small" => PicnnConfig::desk_small(),
        "full" => PicnnConfig::full(),
        other => return Err(Error::Config(format!("picnn.preset {other:?} is not a preset"))),
    };
    if let Some(v) = config.take("picnn.input_size")? {
        picnn.input_size = v;
    }
    if let Some(v) = config.take("picnn.channel_scale")? {
        picnn.channel_scale = v;
    }
    if let Some(v) = config.take("picnn.fc_dim")? {
        picnn.fc_dim = v;
    }
    picnn.pose_branch = method == TrainMethod::Picnn;

    let mut train = TrainConfig::default();
    train.iterations = config.take_or("train.iterations", train.iterations)?;
    train.batch_size = config.take_or("train.batch_size", train.batch_size)?;
    train.momentum = config.take_or("train.momentum", train.momentum)?;
    train.weight_decay = config.take_or("train.weight_decay", train.weight_decay)?;
    train.pose_weight = config.take_or("train.pose_weight", train.pose_weight)?;
    train.log_every = config.take_or("train.log_every", train.log_every)?;
    if let Some(spec) = config.take::<String>("train.schedule")? {
        train.schedule = parse_schedule(&spec)?;
    }

    let mut peec = PeecConfig::default();
    peec.clusters = config.take_or("peec.clusters", peec.clusters)?;
    peec.forest.tree_count = config.take_or("peec.trees", peec.forest.tree_count)?;
    peec.forest.candidates_per_node =
        config.take_or("peec.candidates_per_node", peec.forest.candidates_per_node)?;

    let mut gazelock = GazeLockConfig::default();
    gazelock.pca_dims = config.take_or("gazelock.pca_dims", gazelock.pca_dims)?;
    gazelock.pose_clusters = config.take_or("gazelock.pose_clusters", gazelock.pose_clusters)?;
    gazelock.svm.cost = config.take_or("gazelock.svm_cost", gazelock.svm.cost)?;
    gazelock.svm.epochs = config.take_or("gazelock.svm_epochs", gazelock.svm.epochs)?;

    Ok(TrainSettings {
        picnn,
        train,
        rebalance: config.take_or("train.rebalance", 1u8)? != 0,
        target_positive_rate: config.take_or("train.target_positive_rate", 0.4)?,
        peec,
        gazelock,
    })
}

/// Parses `"100000:0.005,200000:0.0005"` into schedule pairs.
fn parse_schedule(spec: &str) -> Result<Vec<(usize, f64)>> {
    spec.split(',')
        .map(|part| {
            let (bound, rate) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("schedule entry {part:?} is not bound:rate")))?;
            Ok((
                bound
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad schedule bound {bound:?}")))?,
                rate.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad schedule rate {rate:?}")))?,
            ))
        })
        .collect()
}

/// Landmark sidecar indexed by (session, frame).
pub struct LandmarkIndex {
    rows: BTreeMap<(String, usize), LandmarkRow>,
}

impl LandmarkIndex {
    /// Loads `landmarks.csv` from the manifest's directory.
    pub fn load_beside(manifest_path: &Path) -> Result<LandmarkIndex> {
        let path = manifest_path.parent().unwrap_or(Path::new(".")).join("landmarks.csv");
        let rows = dataset::read_landmarks(&path)?
            .into_iter()
            .map(|r| ((r.session_id.clone(), r.frame_index), r))
            .collect();
        Ok(LandmarkIndex { rows })
    }

    pub fn get(&self, session_id: &str, frame_index: usize) -> Option<&LandmarkRow> {
        self.rows.get(&(session_id.to_string(), frame_index))
    }
}

/// Cuts the aligned eye pair for a row, when its image and landmarks allow.
fn eyes_for_row(
    row: &ManifestRow,
    patch: Option<&FacePatch>,
    landmarks: &LandmarkIndex,
) -> Option<(eyecontact::imaging::EyePatch, eyecontact::imaging::EyePatch)> {
    if !row.landmark_available {
        return None;
    }
    let patch = patch?;
    let lm = landmarks.get(&row.session_id, row.frame_index)?;
    align_eyes(
        patch,
        Point2::new(lm.left.0, lm.left.1),
        Point2::new(lm.right.0, lm.right.1),
        lm.roll_deg,
    )
    .ok()
}

/// Builds the aligned training frames for the landmark-based baselines.
/// Returns the frames plus the count of rows that had to be dropped because
/// their face, landmarks or pose were missing.
pub fn baseline_frames(
    manifest: &Manifest,
    patches: &[Option<FacePatch>],
    landmarks: &LandmarkIndex,
) -> Result<(Vec<BaselineFrame>, usize)> {
    let mut frames = Vec::new();
    let mut excluded = 0usize;
    for (row, patch) in manifest.rows.iter().zip(patches) {
        let usable = row.pose.and_then(|pose| {
            eyes_for_row(row, patch.as_ref(), landmarks).map(|eyes| (pose, eyes))
        });
        match usable {
            Some(([yaw, pitch, roll], (left, right))) => frames.push(BaselineFrame {
                pose: HeadPose::new(yaw, pitch, roll),
                left,
                right,
                label: row.label,
            }),
            None => excluded += 1,
        }
    }
    if frames.is_empty() {
        return Err(Error::DegenerateInput(
            "no trainable frames: landmark-based methods need rows with an image, \
             landmarks and head pose"
                .into(),
        ));
    }
    Ok((frames, excluded))
}

/// Assembles the network training set: frames with images, optionally
/// rebalanced toward the target positive rate with augmented copies.
fn picnn_train_set(
    manifest: &Manifest,
    patches: &[Option<FacePatch>],
    settings: &TrainSettings,
    rng: &mut Rng,
) -> Result<TrainSet> {
    let usable: Vec<usize> = (0..manifest.rows.len()).filter(|&i| patches[i].is_some()).collect();
    if usable.is_empty() {
        return Err(Error::DegenerateInput("no frames with images to train on".into()));
    }
    let set_patches: Vec<FacePatch> =
        usable.iter().map(|&i| patches[i].clone().unwrap()).collect();
    let labels: Vec<bool> = usable.iter().map(|&i| manifest.rows[i].label).collect();

    let entry = |index: usize, augment| TrainEntry {
        patch: index,
        augment,
        label: labels[index],
        pose: manifest.rows[usable[index]].pose,
    };
    let entries = if settings.rebalance {
        rebalance_entries(&labels, settings.target_positive_rate, &AugmentRanges::default(), rng)?
            .into_iter()
            .map(|e| entry(e.index, e.augment))
            .collect()
    } else {
        (0..labels.len()).map(|i| entry(i, None)).collect()
    };
    Ok(TrainSet { patches: set_patches, entries })
}

/// A trained model of any method, for uniform saving and scoring.
pub enum AnyModel {
    Picnn(PicnnModel32),
    Peec(PeecModel<f64>),
    GazeLock(GazeLockModel<f64>),
}

impl AnyModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            AnyModel::Picnn(m) => m.save(path),
            AnyModel::Peec(m) => m.save(path),
            AnyModel::GazeLock(m) => m.save(path),
        }
    }

    /// Loads whatever model type the container holds.
    pub fn load(path: &Path) -> Result<AnyModel> {
        let container = Container::read_from(path)?;
        match container.tag {
            tags::PICNN => Ok(AnyModel::Picnn(PicnnModel32::from_container(&container)?)),
            tags::PEEC => Ok(AnyModel::Peec(PeecModel::from_container(&container)?)),
            tags::GAZELOCK => Ok(AnyModel::GazeLock(GazeLockModel::from_container(&container)?)),
            tag => Err(Error::Parse(format!("file {} holds model tag {tag}, which no command can score", path.display()))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Picnn(m) if m.config.pose_branch => "picnn",
            AnyModel::Picnn(_) => "alexnet",
            AnyModel::Peec(_) => "peec",
            AnyModel::GazeLock(_) => "gazelock",
        }
    }

    /// Scores every manifest row. A row the model cannot score — no face
    /// image, or missing landmarks/pose for the baselines — becomes an
    /// abstention with an empty score.
    pub fn score_rows(
        &self,
        manifest: &Manifest,
        patches: &[Option<FacePatch>],
        landmarks: Option<&LandmarkIndex>,
    ) -> Result<Vec<ScoreRow>> {
        let mut scores: Vec<Option<f64>> = vec![None; manifest.rows.len()];
        match self {
            AnyModel::Picnn(model) => {
                let usable: Vec<usize> =
                    (0..patches.len()).filter(|&i| patches[i].is_some()).collect();
                let batch: Vec<FacePatch> =
                    usable.iter().map(|&i| patches[i].clone().unwrap()).collect();
                for (&i, p) in usable.iter().zip(model.predict_patches(&batch)?) {
                    scores[i] = Some(p as f64);
                }
            }
            AnyModel::Peec(model) => {
                let landmarks = need_landmarks(landmarks)?;
                for (i, (row, patch)) in manifest.rows.iter().zip(patches).enumerate() {
                    if let (Some([yaw, pitch, roll]), Some((left, right))) =
                        (row.pose, eyes_for_row(row, patch.as_ref(), landmarks))
                    {
                        let pose = HeadPose::new(yaw, pitch, roll);
                        scores[i] = Some(model.predict(&pose, &left, &right)?);
                    }
                }
            }
            AnyModel::GazeLock(model) => {
                let landmarks = need_landmarks(landmarks)?;
                for (i, (row, patch)) in manifest.rows.iter().zip(patches).enumerate() {
                    if let Some((left, right)) = eyes_for_row(row, patch.as_ref(), landmarks) {
                        scores[i] = Some(model.predict(&left, &right)?);
                    }
                }
            }
        }
        Ok(manifest
            .rows
            .iter()
            .zip(scores)
            .map(|(row, score)| ScoreRow {
                session_id: row.session_id.clone(),
                frame_index: row.frame_index,
                truth: row.label,
                score,
            })
            .collect())
    }
}

fn need_landmarks<'a>(landmarks: Option<&'a LandmarkIndex>) -> Result<&'a LandmarkIndex> {
    landmarks.ok_or_else(|| {
        Error::Config("this model scores eye crops and needs the landmark sidecar".into())
    })
}

/// Trains the requested method on manifest rows already in memory. Baseline
/// methods ignore the iteration settings; the network ignores the baseline
/// namespaces.
pub fn train_model(
    manifest: &Manifest,
    patches: &[Option<FacePatch>],
    landmarks: Option<&LandmarkIndex>,
    method: TrainMethod,
    settings: &TrainSettings,
    seed: u64,
) -> Result<(AnyModel, Vec<TrainLogRow>)> {
    let master = Rng::new(seed);
    match method {
        TrainMethod::Picnn | TrainMethod::Alexnet => {
            let mut rebalance_rng = master.substream(stream::REBALANCE);
            let set = picnn_train_set(manifest, patches, settings, &mut rebalance_rng)?;
            log::info!(
                "training {} on {} entries ({} source frames)",
                if method == TrainMethod::Picnn { "picnn" } else { "alexnet" },
                set.entries.len(),
                set.patches.len()
            );
            let mut model = PicnnModel32::init(settings.picnn, &master.substream(stream::INIT))?;
            let log =
                train_picnn(&mut model, &set, &settings.train, &master.substream(stream::TRAIN))?;
            Ok((AnyModel::Picnn(model), log))
        }
        TrainMethod::Peec => {
            let landmarks = need_landmarks(landmarks)?;
            let (frames, excluded) = baseline_frames(manifest, patches, landmarks)?;
            log::info!("fitting peec on {} frames ({excluded} excluded)", frames.len());
            let mut rng = master.substream(stream::FIT);
            let model = fit_peec::<f64>(&frames, &settings.peec, &mut rng)?;
            Ok((AnyModel::Peec(model), Vec::new()))
        }
        TrainMethod::Gazelock => {
            let landmarks = need_landmarks(landmarks)?;
            let (frames, excluded) = baseline_frames(manifest, patches, landmarks)?;
            log::info!("fitting gazelock on {} frames ({excluded} excluded)", frames.len());
            let mut rng = master.substream(stream::FIT);
            let model = fit_gazelock::<f64>(&frames, &settings.gazelock, &mut rng)?;
            Ok((AnyModel::GazeLock(model), Vec::new()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_strings_parse_or_fail_loudly() {
        assert_eq!(
            parse_schedule("100000:0.005, 200000:0.0005").unwrap(),
            vec![(100_000, 0.005), (200_000, 0.0005)]
        );
        assert!(parse_schedule("100000").is_err());
        assert!(parse_schedule("x:0.005").is_err());
    }

    #[test]
    fn settings_resolve_presets_and_method_branches() {
        let mut config = RunConfig::parse(
            "picnn.preset = desk_small\ntrain.iterations = 10\npeec.trees = 7\n",
        )
        .unwrap();
        let s = train_settings(&mut config, TrainMethod::Alexnet).unwrap();
        config.finish().unwrap();
        assert_eq!(s.picnn.input_size, 48);
        assert!(!s.picnn.pose_branch, "alexnet drops the pose branch");
        assert_eq!(s.train.iterations, 10);
        assert_eq!(s.peec.forest.tree_count, 7);
        assert!(s.rebalance);

        let mut config = RunConfig::parse("picnn.preset = nope\n").unwrap();
        assert!(train_settings(&mut config, TrainMethod::Picnn).is_err());
    }
}
