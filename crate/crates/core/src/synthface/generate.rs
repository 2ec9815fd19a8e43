//! Session and dataset generation on top of the scene renderer.

use super::{render_face, SceneParams};
use crate::imaging::{FacePatch, Point2};
use crate::numerics::Rng;
use crate::{Error, Result};
use rayon::prelude::*;

/// Knobs for a generated recording campaign. Sessions are contiguous frame
/// sequences from one subject; pose follows a reflected random walk, labels
/// follow a two-state Markov chain, and gaze is sampled consistently with
/// the drawn label.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub sessions: usize,
    pub frames_per_session: usize,
    pub subjects: usize,
    /// Square patch side length in pixels.
    pub size: usize,
    pub yaw_range: (f64, f64),
    pub pitch_range: (f64, f64),
    pub roll_range: (f64, f64),
    /// Per-frame random-walk step scale in degrees.
    pub pose_step_deg: f64,
    /// Stationary probability of the eye-contact state.
    pub positive_rate: f64,
    /// Mean length of a contact event in frames.
    pub mean_event_length: f64,
    /// Angular threshold that defines eye contact.
    pub contact_threshold_deg: f64,
    /// Fraction of frames with a significant foreground occlusion.
    pub occlusion_rate: f64,
}

impl GeneratorConfig {
    /// Head pose stays inside the landmark-friendly range, so nearly every
    /// frame has landmarks and the availability ceiling is set by occlusion.
    pub fn base(sessions: usize, frames_per_session: usize) -> Self {
        GeneratorConfig {
            sessions,
            frames_per_session,
            subjects: sessions.div_ceil(2).max(1),
            size: 64,
            yaw_range: (-45.0, 45.0),
            pitch_range: (-20.0, 20.0),
            roll_range: (-12.0, 12.0),
            pose_step_deg: 3.0,
            positive_rate: 0.08,
            mean_event_length: 5.0,
            contact_threshold_deg: 10.0,
            occlusion_rate: 0.04,
        }
    }

    /// Yaw swings well past the landmark limit; about a quarter of the
    /// frames lose their landmarks, which is what the pose-dependent
    /// baselines have to cope with.
    pub fn wide_pose(sessions: usize, frames_per_session: usize) -> Self {
        GeneratorConfig {
            yaw_range: (-60.0, 60.0),
            pitch_range: (-25.0, 25.0),
            ..GeneratorConfig::base(sessions, frames_per_session)
        }
    }
}

/// One generated frame with its rendered patch and full ground truth.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub session_id: String,
    pub subject_id: String,
    pub frame_index: usize,
    pub scene: SceneParams,
    /// Eye-contact label, always equal to
    /// `scene.eye_contact(contact_threshold_deg)`.
    pub label: bool,
    /// Whether a landmark detector would have produced eye centers here:
    /// pose close enough to frontal and no heavy occlusion.
    pub landmark_available: bool,
    pub left_eye: Point2,
    pub right_eye: Point2,
    pub diagnosis: String,
    pub protocol: String,
    pub patch: FacePatch,
}

/// Aggregate counts over a generated set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSummary {
    pub frames: usize,
    pub positives: usize,
    pub landmarks_available: usize,
}

impl DatasetSummary {
    pub fn positive_rate(&self) -> f64 {
        self.positives as f64 / self.frames as f64
    }

    pub fn availability(&self) -> f64 {
        self.landmarks_available as f64 / self.frames as f64
    }
}

/// A landmark detector loses track outside this pose box or under heavy
/// occlusion.
pub fn landmark_available(yaw: f64, pitch: f64, occlusion: f64) -> bool {
    yaw.abs() <= 45.0 && pitch.abs() <= 30.0 && occlusion < 0.3
}

fn validate(config: &GeneratorConfig) -> Result<()> {
    if config.sessions == 0 || config.frames_per_session == 0 || config.subjects == 0 {
        return Err(Error::Config("sessions, frames and subjects must be positive".into()));
    }
    if config.size < 16 {
        return Err(Error::Config(format!("patch size {} is below the minimum 16", config.size)));
    }
    if !(0.0..1.0).contains(&config.positive_rate) || config.positive_rate <= 0.0 {
        return Err(Error::Config(format!(
            "positive rate {} must be in (0, 1)",
            config.positive_rate
        )));
    }
    if config.mean_event_length < 1.0 {
        return Err(Error::Config("mean event length must be at least one frame".into()));
    }
    for (lo, hi) in [config.yaw_range, config.pitch_range, config.roll_range] {
        if lo >= hi {
            return Err(Error::Config(format!("empty angle range ({lo}, {hi})")));
        }
    }
    Ok(())
}

/// Generates every session of the campaign. Sessions are independent given
/// the seed, so they are rendered in parallel and concatenated in order.
pub fn generate_dataset(config: &GeneratorConfig, seed: u64) -> Result<Vec<SynthSample>> {
    validate(config)?;
    let sessions: Vec<Vec<SynthSample>> = (0..config.sessions)
        .into_par_iter()
        .map(|s| generate_session_unchecked(config, seed, s))
        .collect();
    Ok(sessions.into_iter().flatten().collect())
}

/// Generates one session. The result depends only on (config, seed,
/// session_index), which lets callers stream large campaigns session by
/// session with bounded memory.
pub fn generate_session(
    config: &GeneratorConfig,
    seed: u64,
    session_index: usize,
) -> Result<Vec<SynthSample>> {
    validate(config)?;
    if session_index >= config.sessions {
        return Err(Error::OutOfBounds(format!(
            "session {session_index} of {}",
            config.sessions
        )));
    }
    Ok(generate_session_unchecked(config, seed, session_index))
}

/// Identity-level substream ids sit far above session ids so the two never
/// collide.
const SUBJECT_STREAM_BASE: u64 = 1 << 40;

fn generate_session_unchecked(
    config: &GeneratorConfig,
    seed: u64,
    session_index: usize,
) -> Vec<SynthSample> {
    let master = Rng::new(seed);
    let mut rng = master.substream(session_index as u64);

    let subject_index = session_index % config.subjects;
    let mut subject_rng = master.substream(SUBJECT_STREAM_BASE + subject_index as u64);
    let identity = subject_rng.next_u64();
    let diagnosis = if subject_rng.next_bool(0.5) { "asd" } else { "td" };

    let session_id = format!("s{session_index:04}");
    let subject_id = format!("subj{subject_index:03}");
    let protocol = if rng.next_bool(0.5) { "tabletop" } else { "floorplay" };

    // Session-level conditions.
    let session_illumination = rng.range_f64(0.75, 1.25);

    // Reflected random walks start at the stationary (uniform) distribution.
    let mut yaw = rng.range_f64(config.yaw_range.0, config.yaw_range.1);
    let mut pitch = rng.range_f64(config.pitch_range.0, config.pitch_range.1);
    let mut roll = rng.range_f64(config.roll_range.0, config.roll_range.1);

    // Two-state Markov chain with the requested stationary rate and mean
    // positive run length: exit rate 1/L, entry rate balancing it.
    let exit = 1.0 / config.mean_event_length;
    let entry = config.positive_rate * exit / (1.0 - config.positive_rate);
    let mut contact_state = rng.next_bool(config.positive_rate);

    let mut samples = Vec::with_capacity(config.frames_per_session);
    for frame_index in 0..config.frames_per_session {
        if frame_index > 0 {
            yaw = walk(yaw, config.yaw_range, config.pose_step_deg, &mut rng);
            pitch = walk(pitch, config.pitch_range, config.pose_step_deg * 0.7, &mut rng);
            roll = walk(roll, config.roll_range, config.pose_step_deg * 0.5, &mut rng);
            let flip = if contact_state { exit } else { entry };
            if rng.next_bool(flip) {
                contact_state = !contact_state;
            }
        }

        let occlusion = if rng.next_bool(config.occlusion_rate) {
            rng.range_f64(0.35, 0.85)
        } else {
            rng.range_f64(0.0, 0.1)
        };

        let (gaze_azimuth, gaze_elevation) =
            sample_gaze(contact_state, yaw, pitch, config.contact_threshold_deg, &mut rng);

        let scene = SceneParams {
            yaw,
            pitch,
            roll,
            gaze_azimuth,
            gaze_elevation,
            identity,
            illumination: (session_illumination + rng.range_f64(-0.05, 0.05)).clamp(0.5, 1.5),
            occlusion,
            noise_seed: rng.next_u64(),
            size: config.size,
        };
        debug_assert_eq!(scene.eye_contact(config.contact_threshold_deg), contact_state);

        let (patch, left_eye, right_eye) = render_face(&scene);
        samples.push(SynthSample {
            session_id: session_id.clone(),
            subject_id: subject_id.clone(),
            frame_index,
            scene,
            label: contact_state,
            landmark_available: landmark_available(yaw, pitch, occlusion),
            left_eye,
            right_eye,
            diagnosis: diagnosis.to_string(),
            protocol: protocol.to_string(),
            patch,
        });
    }
    samples
}

/// One reflected random-walk step, guaranteed to stay inside the range.
fn walk(value: f64, range: (f64, f64), step: f64, rng: &mut Rng) -> f64 {
    let mut next = value + step * rng.next_normal();
    // Reflect until inside; a single reflection almost always suffices
    // because steps are small relative to the range.
    for _ in 0..64 {
        if next < range.0 {
            next = 2.0 * range.0 - next;
        } else if next > range.1 {
            next = 2.0 * range.1 - next;
        } else {
            return next;
        }
    }
    value.clamp(range.0, range.1)
}

/// Samples an eye-in-head gaze offset consistent with the desired label.
/// Contact frames aim within 90% of the threshold; non-contact frames aim
/// between 110% of the threshold and 40 degrees off-camera. The exact label
/// predicate is re-checked so the stored label always matches the scene.
fn sample_gaze(
    contact: bool,
    yaw: f64,
    pitch: f64,
    threshold_deg: f64,
    rng: &mut Rng,
) -> (f64, f64) {
    for _ in 0..1000 {
        let (target_az, target_el) = if contact {
            let radius = 0.9 * threshold_deg * rng.next_f64().sqrt();
            let angle = rng.range_f64(0.0, std::f64::consts::TAU);
            (radius * angle.cos(), radius * angle.sin())
        } else {
            let radius = rng.range_f64(1.1 * threshold_deg, 40.0);
            let angle = rng.range_f64(0.0, std::f64::consts::TAU);
            (radius * angle.cos(), radius * angle.sin())
        };
        let scene = SceneParams {
            yaw,
            pitch,
            roll: 0.0,
            gaze_azimuth: target_az - yaw,
            gaze_elevation: target_el - pitch,
            identity: 0,
            illumination: 1.0,
            occlusion: 0.0,
            noise_seed: 0,
            size: 64,
        };
        if scene.eye_contact(threshold_deg) == contact {
            return (scene.gaze_azimuth, scene.gaze_elevation);
        }
    }
    // Unreachable for sane thresholds; aiming dead-center is always contact.
    (-yaw, -pitch)
}

/// Counts frames, positives and landmark availability over samples.
pub fn summarize(samples: &[SynthSample]) -> DatasetSummary {
    DatasetSummary {
        frames: samples.len(),
        positives: samples.iter().filter(|s| s.label).count(),
        landmarks_available: samples.iter().filter(|s| s.landmark_available).count(),
    }
}
