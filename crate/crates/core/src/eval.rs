//! Imbalance-aware evaluation: threshold sweeps with abstentions,
//! subject-disjoint folds, class rebalancing and dataset statistics.
//!
//! Eye-contact events are rare, so accuracy-style summaries are useless
//! here. Everything in this module is built around the positive class:
//! precision/recall sweeps with area under the PR curve, F1 and Matthews
//! correlation at each operating point, and explicit handling of frames on
//! which a detector abstains (no face, no prediction) — those always count
//! against recall, never for precision.

use crate::imaging::{sample_augment_spec, AugmentRanges, AugmentSpec};
use crate::numerics::Rng;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// One evaluated frame: the label and the detector's score, `None` when the
/// detector made no prediction for this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredFrame {
    pub truth: bool,
    pub score: Option<f64>,
}

impl ScoredFrame {
    pub fn new(truth: bool, score: Option<f64>) -> Self {
        ScoredFrame { truth, score }
    }
}

/// Confusion counts and derived metrics at one decision threshold
/// (predict positive iff `score >= threshold`; abstentions predict
/// negative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

/// Full sweep over every distinct score.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Points in descending threshold order (recall non-decreasing).
    pub points: Vec<SweepPoint>,
    /// Area under the precision-recall curve by the step rule
    /// `sum (R_i - R_{i-1}) * P_i`.
    pub average_precision: f64,
    /// Index into `points` of the best F1, ties to the higher threshold.
    pub best_f1: usize,
    /// Index into `points` of the best Matthews correlation, ties likewise.
    pub best_mcc: usize,
}

impl SweepReport {
    pub fn best_f1_point(&self) -> &SweepPoint {
        &self.points[self.best_f1]
    }

    pub fn best_mcc_point(&self) -> &SweepPoint {
        &self.points[self.best_mcc]
    }
}

fn metrics_at(threshold: f64, tp: usize, fp: usize, tn: usize, fn_: usize) -> SweepPoint {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
    let denom =
        ((tp + fp) as f64 * (tp + fn_) as f64 * (tn + fp) as f64 * (tn + fn_) as f64).sqrt();
    let mcc = if denom == 0.0 { 0.0 } else { (tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / denom };
    SweepPoint { threshold, tp, fp, tn, fn_, precision, recall, f1, mcc }
}

/// Sweeps the decision threshold over every distinct score in `frames`.
///
/// Scored frames sort once; each threshold then inherits its confusion
/// counts incrementally, so the whole sweep is `O(n log n)` rather than the
/// quadratic recount a literal re-evaluation per threshold would cost.
/// Frames with `score: None` are fixed false negatives (when positive) or
/// true negatives (when negative) at every threshold.
pub fn sweep_thresholds(frames: &[ScoredFrame]) -> Result<SweepReport> {
    if frames.iter().any(|f| f.score.is_some_and(|s| !s.is_finite())) {
        return Err(Error::Numeric("scores must be finite".into()));
    }
    let mut scored: Vec<(f64, bool)> =
        frames.iter().filter_map(|f| f.score.map(|s| (s, f.truth))).collect();
    if scored.is_empty() {
        return Err(Error::DegenerateInput("no frame carries a score".into()));
    }
    let abstained_pos = frames.iter().filter(|f| f.score.is_none() && f.truth).count();
    let abstained_neg = frames.iter().filter(|f| f.score.is_none() && !f.truth).count();
    let total_pos = abstained_pos + scored.iter().filter(|&&(_, t)| t).count();
    let total_neg = abstained_neg + scored.iter().filter(|&&(_, t)| !t).count();
    if total_pos == 0 || total_neg == 0 {
        return Err(Error::DegenerateInput("both truth classes must be present".into()));
    }

    // Descending by score; the exact tie order does not matter because a
    // threshold always swallows a whole group of equal scores.
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let fn_ = total_pos - tp;
        let tn = total_neg - fp;
        points.push(metrics_at(threshold, tp, fp, tn, fn_));
    }

    let mut average_precision = 0.0;
    let mut prev_recall = 0.0;
    for p in &points {
        average_precision += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    let best_by = |key: fn(&SweepPoint) -> f64| {
        let mut best = 0;
        for (i, p) in points.iter().enumerate() {
            if key(p) > key(&points[best]) {
                best = i;
            }
        }
        best
    };
    Ok(SweepReport {
        average_precision,
        best_f1: best_by(|p| p.f1),
        best_mcc: best_by(|p| p.mcc),
        points,
    })
}

/// One session's identity for fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionMeta {
    pub session_id: String,
    pub subject_id: String,
    pub diagnosis: String,
    pub protocol: String,
}

/// Splits subjects into `k` cross-validation folds. Folds are
/// subject-disjoint (every session of a subject lands in the subject's
/// fold) and stratified on (diagnosis, protocol of the subject's first
/// session): each stratum is shuffled and dealt round-robin, with the
/// dealing cursor carried across strata so overall fold sizes stay within
/// one of each other. Returns the subject ids of each fold.
pub fn make_folds(sessions: &[SessionMeta], k: usize, rng: &Rng) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::Config(format!("{k} folds make no split")));
    }
    // First session in input order defines the subject's stratum.
    let mut subject_keys: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for s in sessions {
        subject_keys
            .entry(s.subject_id.as_str())
            .or_insert((s.diagnosis.as_str(), s.protocol.as_str()));
    }
    if subject_keys.len() < k {
        return Err(Error::DegenerateInput(format!(
            "{} subjects cannot fill {k} folds",
            subject_keys.len()
        )));
    }
    let mut strata: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
    for (subject, key) in &subject_keys {
        strata.entry(*key).or_default().push(subject);
    }
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for (stratum_index, (_, mut subjects)) in strata.into_iter().enumerate() {
        // BTreeMap iteration already sorted the subjects; shuffle pulls from
        // a stratum-specific substream so strata stay independent.
        let mut r = rng.substream(stratum_index as u64);
        r.shuffle(&mut subjects);
        for subject in subjects {
            folds[cursor % k].push(subject.to_string());
            cursor += 1;
        }
    }
    Ok(folds)
}

/// Rebalancing targets: how many positive and negative examples to train on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RebalanceCounts {
    pub target_positive: usize,
    pub target_negative: usize,
}

/// Computes rebalanced class counts for a desired positive rate `t`.
///
/// With `P` positives and `N` negatives the full correction would multiply
/// the positive count by `r = (t / (1 - t)) * (N / P)`. Applying it all by
/// duplication would explode the training set, so the positive side takes
/// `r^(2/3)` of the correction (`P' = round(P * r^(2/3))`) and the negative
/// side is subsampled to meet the rate exactly
/// (`N' = round(P' * (1 - t) / t)`).
pub fn rebalance_counts(positives: usize, negatives: usize, t: f64) -> Result<RebalanceCounts> {
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateInput("both classes must be present to rebalance".into()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("target positive rate {t} is outside (0, 1)")));
    }
    let r = (t / (1.0 - t)) * (negatives as f64 / positives as f64);
    let target_positive = ((positives as f64 * r.powf(2.0 / 3.0)).round() as usize).max(1);
    let target_negative = ((target_positive as f64 * (1.0 - t) / t).round() as usize).max(1);
    Ok(RebalanceCounts { target_positive, target_negative })
}

/// One entry of a rebalanced training set: an index into the original
/// examples plus the augmentation to apply, if the entry is an oversampled
/// copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RebalancedEntry {
    pub index: usize,
    pub augment: Option<AugmentSpec>,
}

/// Materializes a rebalanced example list from labels alone.
///
/// The original members of an oversampled class are all kept verbatim and
/// the extra copies cycle through the class with a freshly sampled
/// augmentation each; a subsampled class is drawn without replacement.
/// Positives come first in the result, then negatives.
pub fn rebalance_entries(
    labels: &[bool],
    t: f64,
    ranges: &AugmentRanges,
    rng: &mut Rng,
) -> Result<Vec<RebalancedEntry>> {
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let counts = rebalance_counts(positives.len(), negatives.len(), t)?;
    let mut out = Vec::with_capacity(counts.target_positive + counts.target_negative);
    resample_class(&positives, counts.target_positive, ranges, rng, &mut out);
    resample_class(&negatives, counts.target_negative, ranges, rng, &mut out);
    Ok(out)
}

fn resample_class(
    members: &[usize],
    target: usize,
    ranges: &AugmentRanges,
    rng: &mut Rng,
    out: &mut Vec<RebalancedEntry>,
) {
    if target <= members.len() {
        for i in rng.sample_indices(members.len(), target) {
            out.push(RebalancedEntry { index: members[i], augment: None });
        }
    } else {
        for &index in members {
            out.push(RebalancedEntry { index, augment: None });
        }
        for extra in 0..target - members.len() {
            out.push(RebalancedEntry {
                index: members[extra % members.len()],
                augment: Some(sample_augment_spec(ranges, rng)),
            });
        }
    }
}

/// Per-session frame counts used for availability reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionAvailability {
    pub session_id: String,
    pub diagnosis: String,
    pub protocol: String,
    pub total_frames: usize,
    /// Frames where a face (and thus a patch) was available.
    pub face_frames: usize,
    /// Frames where facial landmarks were also available.
    pub landmark_frames: usize,
}

/// Availability of one grouping of sessions: mean and population standard
/// deviation of the per-session rates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRate {
    pub group: String,
    pub sessions: usize,
    pub face_mean: f64,
    pub face_std: f64,
    pub landmark_mean: f64,
    pub landmark_std: f64,
}

fn mean_std(rates: &[f64]) -> (f64, f64) {
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summarizes face and landmark availability for all sessions together and
/// per diagnosis and protocol group. Group labels are `All`,
/// `diagnosis:<value>` and `protocol:<value>`; sessions with zero frames
/// are rejected.
pub fn availability_rates(sessions: &[SessionAvailability]) -> Result<Vec<GroupRate>> {
    if sessions.is_empty() {
        return Err(Error::DegenerateInput("no sessions to summarize".into()));
    }
    if let Some(bad) = sessions.iter().find(|s| s.total_frames == 0) {
        return Err(Error::DegenerateInput(format!("session {} has no frames", bad.session_id)));
    }
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for s in sessions {
        let face = s.face_frames as f64 / s.total_frames as f64;
        let lm = s.landmark_frames as f64 / s.total_frames as f64;
        groups.entry("All".into()).or_default().push((face, lm));
        groups.entry(format!("diagnosis:{}", s.diagnosis)).or_default().push((face, lm));
        groups.entry(format!("protocol:{}", s.protocol)).or_default().push((face, lm));
    }
    let mut out = Vec::with_capacity(groups.len());
    // "All" first, then the sorted group labels.
    for (group, rates) in
        std::iter::once("All".to_string()).chain(groups.keys().filter(|g| *g != "All").cloned())
            .map(|g| {
                let rates = groups[&g].clone();
                (g, rates)
            })
    {
        let face: Vec<f64> = rates.iter().map(|r| r.0).collect();
        let lm: Vec<f64> = rates.iter().map(|r| r.1).collect();
        let (face_mean, face_std) = mean_std(&face);
        let (landmark_mean, landmark_std) = mean_std(&lm);
        out.push(GroupRate {
            group,
            sessions: rates.len(),
            face_mean,
            face_std,
            landmark_mean,
            landmark_std,
        });
    }
    Ok(out)
}

/// Draws nested session subsets of the given ascending sizes: one shuffle,
/// then prefixes, so each subset contains every smaller one.
pub fn nested_session_subsets(
    session_ids: &[String],
    sizes: &[usize],
    rng: &Rng,
) -> Result<Vec<Vec<String>>> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("subset sizes must be non-empty and strictly increasing".into()));
    }
    if sizes[0] == 0 || *sizes.last().unwrap() > session_ids.len() {
        return Err(Error::Config(format!(
            "subset sizes must fit 1..={}",
            session_ids.len()
        )));
    }
    let mut order: Vec<&String> = session_ids.iter().collect();
    let mut r = rng.substream(0);
    r.shuffle(&mut order);
    Ok(sizes.iter().map(|&s| order[..s].iter().map(|id| (*id).clone()).collect()).collect())
}

/// Fixed-range histogram; values outside the range clamp into the edge
/// bins so totals always equal the number of added values.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins > 0 && hi > lo, "histogram needs a positive range and bin count");
        Histogram { lo, hi, counts: vec![0; bins] }
    }

    pub fn add(&mut self, value: f64) {
        let bins = self.counts.len();
        let pos = (value - self.lo) / (self.hi - self.lo) * bins as f64;
        let bin = (pos.floor().max(0.0) as usize).min(bins - 1);
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(bin_lo, bin_hi, count)` rows for serialization.
    pub fn rows(&self) -> Vec<(f64, f64, u64)> {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w, c))
            .collect()
    }
}

/// Per-frame facts feeding [`dataset_stats`]; everything optional except
/// the label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStat {
    pub label: bool,
    /// Face center in frame-normalized [0, 1] coordinates, when a detection
    /// exists.
    pub center: Option<(f64, f64)>,
    /// (yaw, pitch, roll) in degrees, when head pose is known.
    pub pose: Option<[f64; 3]>,
}

/// Distribution summary of a dataset: face position histograms over [0, 1]
/// in 50 bins and pose angle histograms over [-90, 90] in 36 bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub frames: usize,
    pub positives: usize,
    pub with_center: usize,
    pub with_pose: usize,
    pub position_x: Histogram,
    pub position_y: Histogram,
    pub yaw: Histogram,
    pub pitch: Histogram,
    pub roll: Histogram,
}

pub fn dataset_stats(rows: &[FrameStat]) -> DatasetStats {
    let mut stats = DatasetStats {
        frames: rows.len(),
        positives: 0,
        with_center: 0,
        with_pose: 0,
        position_x: Histogram::new(0.0, 1.0, 50),
        position_y: Histogram::new(0.0, 1.0, 50),
        yaw: Histogram::new(-90.0, 90.0, 36),
        pitch: Histogram::new(-90.0, 90.0, 36),
        roll: Histogram::new(-90.0, 90.0, 36),
    };
    for row in rows {
        stats.positives += row.label as usize;
        if let Some((x, y)) = row.center {
            stats.with_center += 1;
            stats.position_x.add(x);
            stats.position_y.add(y);
        }
        if let Some([yaw, pitch, roll]) = row.pose {
            stats.with_pose += 1;
            stats.yaw.add(yaw);
            stats.pitch.add(pitch);
            stats.roll.add(roll);
        }
    }
    stats
}
