//! Online selection of the child's face among per-frame detections.
//!
//! Recordings from a head-mounted camera usually show more than one face, so
//! downstream gaze scoring needs the child's detection singled out in every
//! frame. The selector works online with no labels: the largest box of the
//! first frame seeds the child class, assignments start from nearest running
//! prototype by cosine similarity, and once enough self-labeled updates have
//! accumulated a small online logistic-regression classifier takes over.

use crate::classifiers::OnlineLogRegModel;
use crate::imaging::FacePatch;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// Axis-aligned detection with the detector's confidence score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl DetectionBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, score: f64) -> Self {
        DetectionBox { x, y, w, h, score }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    fn finite(&self) -> bool {
        [self.x, self.y, self.w, self.h, self.score].iter().all(|v| v.is_finite())
    }
}

/// Intersection over union of two boxes; 0 when either is degenerate.
pub fn iou(a: &DetectionBox, b: &DetectionBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Hit/miss counts from greedy box matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        let denom = self.true_positives + self.false_positives;
        if denom == 0 {
            0.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let denom = self.true_positives + self.false_negatives;
        if denom == 0 {
            0.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    pub fn add(&mut self, other: MatchCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

/// Greedily matches predictions to ground truth: predictions in descending
/// score order (ties keep input order) each claim the still-unmatched truth
/// box of highest overlap, counting a hit when that overlap reaches
/// `iou_threshold`.
pub fn evaluate_detections(
    predicted: &[DetectionBox],
    truth: &[DetectionBox],
    iou_threshold: f64,
) -> MatchCounts {
    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| {
        predicted[b].score.partial_cmp(&predicted[a].score).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut taken = vec![false; truth.len()];
    let mut counts = MatchCounts::default();
    for &p in &order {
        let mut best = 0.0;
        let mut best_at = None;
        for (t, tbox) in truth.iter().enumerate() {
            if taken[t] {
                continue;
            }
            let overlap = iou(&predicted[p], tbox);
            if overlap > best {
                best = overlap;
                best_at = Some(t);
            }
        }
        match best_at {
            Some(t) if best >= iou_threshold => {
                taken[t] = true;
                counts.true_positives += 1;
            }
            _ => counts.false_positives += 1,
        }
    }
    counts.false_negatives = taken.iter().filter(|&&t| !t).count();
    counts
}

/// Detections of one frame of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame: u64,
    pub boxes: Vec<DetectionBox>,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    frame: u64,
    boxes: Vec<[f64; 5]>,
}

/// Parses detections from JSON lines of the form
/// `{"frame": 12, "boxes": [[x, y, w, h, score], ...]}`. Blank lines are
/// skipped; boxes must be finite with positive extent.
pub fn parse_detections_jsonl<R: Read>(reader: R) -> Result<Vec<FrameDetections>> {
    let mut frames = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(Error::from)?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawFrame = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("detections line {}: {e}", lineno + 1)))?;
        let mut boxes = Vec::with_capacity(raw.boxes.len());
        for [x, y, w, h, score] in raw.boxes {
            let b = DetectionBox::new(x, y, w, h, score);
            if !b.finite() || w <= 0.0 || h <= 0.0 {
                return Err(Error::Parse(format!(
                    "detections line {}: box [{x}, {y}, {w}, {h}, {score}] is not a finite positive box",
                    lineno + 1
                )));
            }
            boxes.push(b);
        }
        frames.push(FrameDetections { frame: raw.frame, boxes });
    }
    Ok(frames)
}

pub fn read_detections_jsonl(path: &Path) -> Result<Vec<FrameDetections>> {
    parse_detections_jsonl(std::fs::File::open(path)?)
}

/// Serializes frames to the JSONL accepted by [`parse_detections_jsonl`].
pub fn write_detections_jsonl(path: &Path, frames: &[FrameDetections]) -> Result<()> {
    let mut out = String::new();
    for f in frames {
        let raw = RawFrame {
            frame: f.frame,
            boxes: f.boxes.iter().map(|b| [b.x, b.y, b.w, b.h, b.score]).collect(),
        };
        out.push_str(&serde_json::to_string(&raw).map_err(|e| Error::Parse(e.to_string()))?);
        out.push('\n');
    }
    crate::numerics::write_atomic(path, out.as_bytes())
}

/// Maps a face crop to a feature vector for identity discrimination.
pub trait EmbeddingProvider {
    fn dims(&self) -> usize;
    fn embed(&self, crop: &FacePatch) -> Vec<f64>;
}

/// Default embedding: a 64-bin grayscale histogram concatenated with an 8x8
/// intensity thumbnail, each block normalized to unit length so tone
/// distribution and coarse layout contribute equally, 128 dimensions total.
/// Cheap, rotation-tolerant, and stable across small box jitter.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistogramEmbedding;

fn normalize_block(block: &mut [f64]) {
    let norm: f64 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in block {
            *v /= norm;
        }
    }
}

impl EmbeddingProvider for HistogramEmbedding {
    fn dims(&self) -> usize {
        128
    }

    fn embed(&self, crop: &FacePatch) -> Vec<f64> {
        let gray = crop.to_gray();
        let mut features = vec![0.0; 128];
        for &p in gray.pixels() {
            features[(p / 4) as usize] += 1.0;
        }
        let (w, h) = (gray.width(), gray.height());
        for ty in 0..8 {
            for tx in 0..8 {
                let sx = (tx * w + w / 2) / 8;
                let sy = (ty * h + h / 2) / 8;
                features[64 + ty * 8 + tx] = gray.get(sx.min(w - 1), sy.min(h - 1), 0) as f64 / 255.0;
            }
        }
        let (hist, thumb) = features.split_at_mut(64);
        normalize_block(hist);
        normalize_block(thumb);
        features
    }
}

/// Selector hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct SelectorConfig {
    /// Identities to track; class 0 is the child. Bounded by the classifier
    /// head at four.
    pub classes: usize,
    /// Self-labeled updates consumed before the classifier replaces
    /// prototype matching.
    pub warmup_updates: u64,
    pub learning_rate: f64,
    pub l2_decay: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig { classes: 2, warmup_updates: 10, learning_rate: 0.05, l2_decay: 1e-4 }
    }
}

/// Online face selector; see the module docs for the assignment policy.
pub struct FaceSelector<E: EmbeddingProvider> {
    config: SelectorConfig,
    embedder: E,
    prototypes: Vec<Vec<f64>>,
    counts: Vec<u64>,
    model: OnlineLogRegModel<f64>,
}

/// Side of the canonical square crop fed to the embedder.
const CROP_SIDE: usize = 32;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Nearest-neighbor crop of `b` resampled to the canonical side, clamping
/// source coordinates to the frame.
fn crop_box(frame: &FacePatch, b: &DetectionBox) -> FacePatch {
    let chans = frame.channels();
    let mut pixels = Vec::with_capacity(CROP_SIDE * CROP_SIDE * chans);
    for ty in 0..CROP_SIDE {
        for tx in 0..CROP_SIDE {
            let fx = b.x + (tx as f64 + 0.5) / CROP_SIDE as f64 * b.w - 0.5;
            let fy = b.y + (ty as f64 + 0.5) / CROP_SIDE as f64 * b.h - 0.5;
            let sx = (fx.round().max(0.0) as usize).min(frame.width() - 1);
            let sy = (fy.round().max(0.0) as usize).min(frame.height() - 1);
            for c in 0..chans {
                pixels.push(frame.get(sx, sy, c));
            }
        }
    }
    FacePatch::new(CROP_SIDE, CROP_SIDE, chans, pixels).expect("canonical crop shape is always valid")
}

impl FaceSelector<HistogramEmbedding> {
    pub fn with_default_embedding(config: SelectorConfig) -> Result<Self> {
        Self::new(config, HistogramEmbedding)
    }
}

impl<E: EmbeddingProvider> FaceSelector<E> {
    pub fn new(config: SelectorConfig, embedder: E) -> Result<Self> {
        if config.classes == 0 {
            return Err(Error::Config("the selector needs at least one class".into()));
        }
        let model = OnlineLogRegModel::new(
            config.classes,
            embedder.dims(),
            config.learning_rate,
            config.l2_decay,
        )?;
        Ok(FaceSelector {
            prototypes: vec![vec![0.0; embedder.dims()]; config.classes],
            counts: vec![0; config.classes],
            config,
            embedder,
            model,
        })
    }

    /// Total self-labeled classifier updates so far.
    pub fn updates(&self) -> u64 {
        self.model.update_count()
    }

    /// Assigns an identity class to every detection of one frame, in input
    /// order. Classes are exclusive while free ones remain: boxes are
    /// processed largest first and each takes the best class not yet used in
    /// the frame. An empty frame is a no-op and changes no state.
    pub fn process_frame(&mut self, frame: &FacePatch, boxes: &[DetectionBox]) -> Result<Vec<usize>> {
        if boxes.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(bad) = boxes.iter().find(|b| !b.finite() || b.w <= 0.0 || b.h <= 0.0) {
            return Err(Error::DegenerateInput(format!("detection {bad:?} is not a positive box")));
        }
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        order.sort_by(|&a, &b| {
            boxes[b]
                .area()
                .partial_cmp(&boxes[a].area())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let bootstrap = self.counts.iter().all(|&c| c == 0);
        let mut assignments = vec![0usize; boxes.len()];
        let mut used = vec![false; self.config.classes];
        for (rank, &bi) in order.iter().enumerate() {
            let embedding = self.embedder.embed(&crop_box(frame, &boxes[bi]));
            let class = if self.config.classes == 1 {
                0
            } else if bootstrap {
                // First frame ever: size order seeds the identities, the
                // largest box becoming the child.
                rank.min(self.config.classes - 1)
            } else if self.model.update_count() < self.config.warmup_updates {
                self.pick_class(&used, |c| {
                    if self.counts[c] == 0 {
                        f64::NEG_INFINITY
                    } else {
                        cosine(&embedding, &self.prototypes[c])
                    }
                })
            } else {
                let probs = self.model.probabilities(&embedding)?;
                self.pick_class(&used, |c| probs[c])
            };
            if class < used.len() {
                used[class] = true;
            }
            assignments[bi] = class;
            self.absorb(class, &embedding)?;
        }
        Ok(assignments)
    }

    /// Best class by `score` among the unused ones; when every class is
    /// already taken in this frame the overall best wins.
    fn pick_class(&self, used: &[bool], score: impl Fn(usize) -> f64) -> usize {
        let free: Vec<usize> = (0..self.config.classes).filter(|&c| !used[c]).collect();
        let candidates = if free.is_empty() { (0..self.config.classes).collect() } else { free };
        let mut best = candidates[0];
        for &c in &candidates[1..] {
            if score(c) > score(best) {
                best = c;
            }
        }
        best
    }

    fn absorb(&mut self, class: usize, embedding: &[f64]) -> Result<()> {
        self.counts[class] += 1;
        let n = self.counts[class] as f64;
        for (p, e) in self.prototypes[class].iter_mut().zip(embedding) {
            *p += (e - *p) / n;
        }
        self.model.update(embedding, class)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn iou_takes_hand_computed_values() {
        let a = DetectionBox::new(0.0, 0.0, 10.0, 10.0, 1.0);
        let b = DetectionBox::new(5.0, 0.0, 10.0, 10.0, 1.0);
        // Overlap 5x10 = 50, union 100 + 100 - 50 = 150.
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&a, &a), 1.0);
        let far = DetectionBox::new(30.0, 30.0, 5.0, 5.0, 1.0);
        assert_eq!(iou(&a, &far), 0.0);
        let empty = DetectionBox::new(0.0, 0.0, 0.0, 4.0, 1.0);
        assert_eq!(iou(&a, &empty), 0.0);
    }

    #[test]
    fn greedy_matching_counts_hits_duplicates_and_misses() {
        let truth = [
            DetectionBox::new(0.0, 0.0, 10.0, 10.0, 0.0),
            DetectionBox::new(40.0, 0.0, 10.0, 10.0, 0.0),
            DetectionBox::new(80.0, 0.0, 10.0, 10.0, 0.0),
        ];
        let predicted = [
            DetectionBox::new(1.0, 0.0, 10.0, 10.0, 0.9), // matches truth 0
            DetectionBox::new(0.0, 1.0, 10.0, 10.0, 0.8), // duplicate of truth 0
            DetectionBox::new(41.0, 1.0, 10.0, 10.0, 0.7), // matches truth 1
            DetectionBox::new(200.0, 0.0, 10.0, 10.0, 0.6), // matches nothing
        ];
        let counts = evaluate_detections(&predicted, &truth, 0.5);
        assert_eq!(
            counts,
            MatchCounts { true_positives: 2, false_positives: 2, false_negatives: 1 }
        );
        assert!((counts.precision() - 0.5).abs() < 1e-12);
        // 2 of 3 truth boxes found.
        assert!((counts.recall() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn jsonl_detections_round_trip_and_reject_junk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("boxes.jsonl");
        let frames = vec![
            FrameDetections {
                frame: 0,
                boxes: vec![DetectionBox::new(1.0, 2.0, 30.0, 40.0, 0.97)],
            },
            FrameDetections { frame: 1, boxes: vec![] },
            FrameDetections {
                frame: 5,
                boxes: vec![
                    DetectionBox::new(0.0, 0.0, 10.0, 10.0, 0.5),
                    DetectionBox::new(8.0, 3.0, 12.0, 12.0, 0.25),
                ],
            },
        ];
        write_detections_jsonl(&path, &frames).unwrap();
        assert_eq!(read_detections_jsonl(&path).unwrap(), frames);

        let parsed = parse_detections_jsonl("\n{\"frame\": 3, \"boxes\": []}\n\n".as_bytes()).unwrap();
        assert_eq!(parsed, vec![FrameDetections { frame: 3, boxes: vec![] }]);
        assert!(parse_detections_jsonl("not json".as_bytes()).is_err());
        assert!(
            parse_detections_jsonl("{\"frame\": 0, \"boxes\": [[0, 0, -3, 5, 1]]}".as_bytes())
                .is_err(),
            "negative extents must be rejected"
        );
    }

    #[test]
    fn histogram_embedding_separates_textures_and_has_fixed_dims() {
        let embedder = HistogramEmbedding;
        let mut striped = FacePatch::filled(32, 32, 1, 0).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                striped.set(x, y, 0, if x % 2 == 0 { 230 } else { 30 });
            }
        }
        let flat = FacePatch::filled(32, 32, 1, 128).unwrap();
        let a = embedder.embed(&striped);
        let b = embedder.embed(&flat);
        assert_eq!(a.len(), 128);
        assert_eq!(b.len(), 128);
        assert!(cosine(&a, &b) < 0.9, "distinct textures should not look alike");
        assert!(cosine(&a, &a) > 0.999999);
    }

    /// Paints a recognizable face-like texture into the frame: `child`
    /// faces get bright vertical stripes, others a dark diagonal ramp.
    fn paint(frame: &mut FacePatch, b: &DetectionBox, child: bool, rng: &mut Rng) {
        let (x0, y0) = (b.x as usize, b.y as usize);
        for y in 0..b.h as usize {
            for x in 0..b.w as usize {
                let noise = (rng.next_f64() * 20.0) as i32 - 10;
                let base: i32 = if child {
                    if x % 4 < 2 {
                        220
                    } else {
                        120
                    }
                } else {
                    40 + ((x + 2 * y) % 32) as i32
                };
                let v = (base + noise).clamp(0, 255) as u8;
                frame.set(x0 + x, y0 + y, 0, v);
            }
        }
    }

    #[test]
    fn two_identity_stream_keeps_tracking_the_child() {
        let mut rng = Rng::new(61);
        let mut selector = FaceSelector::with_default_embedding(SelectorConfig::default()).unwrap();
        let mut counts = MatchCounts::default();
        for frame_no in 0..140 {
            let mut frame = FacePatch::filled(96, 64, 1, 90).unwrap();
            // The child's box is usually, but not always, the larger one.
            let child_side = 24 + rng.next_below(9);
            let other_side = 16 + rng.next_below(15);
            let child = DetectionBox::new(
                rng.next_below(96 - child_side) as f64,
                rng.next_below(64 - child_side) as f64,
                child_side as f64,
                child_side as f64,
                0.9,
            );
            let other = DetectionBox::new(
                rng.next_below(96 - other_side) as f64,
                rng.next_below(64 - other_side) as f64,
                other_side as f64,
                other_side as f64,
                0.8,
            );
            paint(&mut frame, &child, true, &mut rng);
            paint(&mut frame, &other, false, &mut rng);
            // Roughly one frame in five shows a single face. The very first
            // frame keeps both so the bootstrap sees the size contrast.
            let single = frame_no > 0 && rng.next_below(5) == 0;
            let (boxes, truth): (Vec<DetectionBox>, Vec<bool>) = if single {
                if rng.next_below(2) == 0 {
                    (vec![child], vec![true])
                } else {
                    (vec![other], vec![false])
                }
            } else if rng.next_below(2) == 0 {
                (vec![child, other], vec![true, false])
            } else {
                (vec![other, child], vec![false, true])
            };
            let classes = selector.process_frame(&frame, &boxes).unwrap();
            for (cls, is_child) in classes.iter().zip(&truth) {
                match (cls, is_child) {
                    (0, true) => counts.true_positives += 1,
                    (0, false) => counts.false_positives += 1,
                    (_, true) => counts.false_negatives += 1,
                    _ => {}
                }
            }
        }
        assert!(selector.updates() > 100);
        assert!(
            counts.precision() > 0.9,
            "child precision {:.3} too low ({counts:?})",
            counts.precision()
        );
        assert!(counts.recall() > 0.9, "child recall {:.3} too low ({counts:?})", counts.recall());
    }

    #[test]
    fn single_class_selectors_accept_everything_as_child() {
        let config = SelectorConfig { classes: 1, ..SelectorConfig::default() };
        let mut selector = FaceSelector::with_default_embedding(config).unwrap();
        let frame = FacePatch::filled(64, 64, 3, 100).unwrap();
        let boxes =
            [DetectionBox::new(0.0, 0.0, 20.0, 20.0, 0.9), DetectionBox::new(30.0, 30.0, 10.0, 10.0, 0.8)];
        assert_eq!(selector.process_frame(&frame, &boxes).unwrap(), vec![0, 0]);
    }

    #[test]
    fn empty_frames_change_nothing() {
        let mut selector = FaceSelector::with_default_embedding(SelectorConfig::default()).unwrap();
        let frame = FacePatch::filled(64, 64, 1, 100).unwrap();
        assert_eq!(selector.process_frame(&frame, &[]).unwrap(), Vec::<usize>::new());
        assert_eq!(selector.updates(), 0);
    }

    #[test]
    fn invalid_boxes_and_configs_are_rejected() {
        let mut selector = FaceSelector::with_default_embedding(SelectorConfig::default()).unwrap();
        let frame = FacePatch::filled(64, 64, 1, 100).unwrap();
        let bad = [DetectionBox::new(0.0, 0.0, f64::NAN, 5.0, 1.0)];
        assert!(selector.process_frame(&frame, &bad).is_err());
        assert!(FaceSelector::with_default_embedding(SelectorConfig {
            classes: 0,
            ..SelectorConfig::default()
        })
        .is_err());
        // More classes than the classifier head supports.
        assert!(FaceSelector::with_default_embedding(SelectorConfig {
            classes: 9,
            ..SelectorConfig::default()
        })
        .is_err());
    }
}
