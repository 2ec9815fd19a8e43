//! On-disk dataset and result formats: the frame manifest, the landmark
//! sidecar, netpbm image trees, and the CSV files emitted by training and
//! evaluation.
//!
//! All formats are plain CSV with fixed headers and no quoting; fields
//! therefore must not contain commas, which the writers enforce. Floats are
//! written with Rust's shortest round-trip formatting, so write → read →
//! write is byte-stable and outputs diff cleanly.

use crate::eval::{ScoredFrame, SessionAvailability, SessionMeta, SweepReport};
use crate::imaging::{decode_netpbm, encode_netpbm, FacePatch};
use crate::numerics::write_atomic;
use crate::picnn::TrainLogRow;
use crate::synthface::SynthSample;
use crate::{Error, Result};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const MANIFEST_HEADER: &str = "session_id,subject_id,frame_index,image_path,label,yaw,pitch,roll,landmark_available,diagnosis,protocol";
pub const LANDMARKS_HEADER: &str =
    "session_id,frame_index,left_x,left_y,right_x,right_y,roll_deg";
pub const SCORES_HEADER: &str = "session_id,frame_index,truth,score";
pub const REPORT_HEADER: &str = "metric,value";
pub const PR_CURVE_HEADER: &str = "threshold,precision,recall";
pub const TRAIN_LOG_HEADER: &str = "iteration,lr,total_loss,ce_loss,pose_loss";
pub const SWEEP_CURVE_HEADER: &str = "sessions,precision,recall";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";

/// One frame of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub session_id: String,
    pub subject_id: String,
    pub frame_index: usize,
    /// Image file relative to the manifest's directory; empty when the
    /// frame has no usable face.
    pub image_path: String,
    pub label: bool,
    /// (yaw, pitch, roll) in degrees; absent when head pose is unknown,
    /// which also masks the frame out of pose-regression training.
    pub pose: Option<[f64; 3]>,
    pub landmark_available: bool,
    pub diagnosis: String,
    pub protocol: String,
}

/// A validated frame manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    /// Wraps rows after checking (session_id, frame_index) uniqueness and
    /// that no field would corrupt the unquoted CSV.
    pub fn new(rows: Vec<ManifestRow>) -> Result<Manifest> {
        let mut seen = BTreeSet::new();
        for row in &rows {
            for field in [
                &row.session_id,
                &row.subject_id,
                &row.image_path,
                &row.diagnosis,
                &row.protocol,
            ] {
                check_field(field)?;
            }
            if !seen.insert((row.session_id.clone(), row.frame_index)) {
                return Err(Error::Parse(format!(
                    "duplicate frame {}:{}",
                    row.session_id, row.frame_index
                )));
            }
        }
        Ok(Manifest { rows })
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = read_file(path)?;
        let mut lines = lines_of(&text);
        expect_header(lines.next(), MANIFEST_HEADER, path)?;
        let mut rows = Vec::new();
        for (number, line) in lines {
            let f = split_fields(line, 11, number)?;
            let pose = match (f[5].is_empty(), f[6].is_empty(), f[7].is_empty()) {
                (true, true, true) => None,
                (false, false, false) => Some([
                    parse_f64(f[5], number)?,
                    parse_f64(f[6], number)?,
                    parse_f64(f[7], number)?,
                ]),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {number}: yaw/pitch/roll must be all present or all empty"
                    )))
                }
            };
            rows.push(ManifestRow {
                session_id: f[0].to_string(),
                subject_id: f[1].to_string(),
                frame_index: parse_usize(f[2], number)?,
                image_path: f[3].to_string(),
                label: parse_flag(f[4], number)?,
                pose,
                landmark_available: parse_flag(f[8], number)?,
                diagnosis: f[9].to_string(),
                protocol: f[10].to_string(),
            });
        }
        Manifest::new(rows)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for row in &self.rows {
            let (yaw, pitch, roll) = match row.pose {
                Some([y, p, r]) => (y.to_string(), p.to_string(), r.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{yaw},{pitch},{roll},{},{},{}",
                row.session_id,
                row.subject_id,
                row.frame_index,
                row.image_path,
                row.label as u8,
                row.landmark_available as u8,
                row.diagnosis,
                row.protocol
            );
        }
        write_atomic(path, out.as_bytes())
    }

    /// One metadata record per session, taken from its first row; input
    /// order is preserved.
    pub fn session_metas(&self) -> Vec<SessionMeta> {
        let mut seen = BTreeSet::new();
        let mut metas = Vec::new();
        for row in &self.rows {
            if seen.insert(row.session_id.as_str()) {
                metas.push(SessionMeta {
                    session_id: row.session_id.clone(),
                    subject_id: row.subject_id.clone(),
                    diagnosis: row.diagnosis.clone(),
                    protocol: row.protocol.clone(),
                });
            }
        }
        metas
    }

    /// Per-session face and landmark counts, for availability reporting.
    /// A frame counts as having a face when it has an image.
    pub fn availability(&self) -> Vec<SessionAvailability> {
        let mut out: Vec<SessionAvailability> = Vec::new();
        for row in &self.rows {
            if out.last().map(|s| s.session_id != row.session_id).unwrap_or(true) {
                if let Some(existing) =
                    out.iter_mut().find(|s| s.session_id == row.session_id)
                {
                    // Interleaved sessions still aggregate correctly.
                    existing.total_frames += 1;
                    existing.face_frames += (!row.image_path.is_empty()) as usize;
                    existing.landmark_frames += row.landmark_available as usize;
                    continue;
                }
                out.push(SessionAvailability {
                    session_id: row.session_id.clone(),
                    diagnosis: row.diagnosis.clone(),
                    protocol: row.protocol.clone(),
                    total_frames: 0,
                    face_frames: 0,
                    landmark_frames: 0,
                });
            }
            let s = out.last_mut().unwrap();
            s.total_frames += 1;
            s.face_frames += (!row.image_path.is_empty()) as usize;
            s.landmark_frames += row.landmark_available as usize;
        }
        out
    }
}

/// Eye landmarks for one frame, in pixel coordinates of its image.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkRow {
    pub session_id: String,
    pub frame_index: usize,
    pub left: (f64, f64),
    pub right: (f64, f64),
    pub roll_deg: f64,
}

pub fn read_landmarks(path: &Path) -> Result<Vec<LandmarkRow>> {
    let text = read_file(path)?;
    let mut lines = lines_of(&text);
    expect_header(lines.next(), LANDMARKS_HEADER, path)?;
    let mut rows = Vec::new();
    for (number, line) in lines {
        let f = split_fields(line, 7, number)?;
        rows.push(LandmarkRow {
            session_id: f[0].to_string(),
            frame_index: parse_usize(f[1], number)?,
            left: (parse_f64(f[2], number)?, parse_f64(f[3], number)?),
            right: (parse_f64(f[4], number)?, parse_f64(f[5], number)?),
            roll_deg: parse_f64(f[6], number)?,
        });
    }
    Ok(rows)
}

pub fn write_landmarks(path: &Path, rows: &[LandmarkRow]) -> Result<()> {
    let mut out = String::from(LANDMARKS_HEADER);
    out.push('\n');
    for row in rows {
        check_field(&row.session_id)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.session_id,
            row.frame_index,
            row.left.0,
            row.left.1,
            row.right.0,
            row.right.1,
            row.roll_deg
        );
    }
    write_atomic(path, out.as_bytes())
}

/// One scored frame as emitted by `predict`: empty score means the
/// detector abstained on this frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub session_id: String,
    pub frame_index: usize,
    pub truth: bool,
    pub score: Option<f64>,
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let text = read_file(path)?;
    let mut lines = lines_of(&text);
    expect_header(lines.next(), SCORES_HEADER, path)?;
    let mut rows = Vec::new();
    for (number, line) in lines {
        let f = split_fields(line, 4, number)?;
        rows.push(ScoreRow {
            session_id: f[0].to_string(),
            frame_index: parse_usize(f[1], number)?,
            truth: parse_flag(f[2], number)?,
            score: if f[3].is_empty() { None } else { Some(parse_f64(f[3], number)?) },
        });
    }
    Ok(rows)
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for row in rows {
        check_field(&row.session_id)?;
        let score = row.score.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{score}", row.session_id, row.frame_index, row.truth as u8);
    }
    write_atomic(path, out.as_bytes())
}

/// Strips score rows down to the evaluation input.
pub fn scored_frames(rows: &[ScoreRow]) -> Vec<ScoredFrame> {
    rows.iter().map(|r| ScoredFrame::new(r.truth, r.score)).collect()
}

/// `metric,value` summary file.
pub fn write_report(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (metric, value) in rows {
        check_field(metric)?;
        let _ = writeln!(out, "{metric},{value}");
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_report(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = read_file(path)?;
    let mut lines = lines_of(&text);
    expect_header(lines.next(), REPORT_HEADER, path)?;
    let mut rows = Vec::new();
    for (number, line) in lines {
        let f = split_fields(line, 2, number)?;
        rows.push((f[0].to_string(), parse_f64(f[1], number)?));
    }
    Ok(rows)
}

/// Precision-recall curve, one row per swept threshold.
pub fn write_pr_curve(path: &Path, report: &SweepReport) -> Result<()> {
    let mut out = String::from(PR_CURVE_HEADER);
    out.push('\n');
    for p in &report.points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall);
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_training_log(path: &Path, rows: &[TrainLogRow]) -> Result<()> {
    let mut out = String::from(TRAIN_LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.lr, r.total_loss, r.ce_loss, r.pose_loss
        );
    }
    write_atomic(path, out.as_bytes())
}

/// Training-set-size curve: `(sessions, precision, recall)` rows.
pub fn write_sweep_curve(path: &Path, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut out = String::from(SWEEP_CURVE_HEADER);
    out.push('\n');
    for (sessions, precision, recall) in rows {
        let _ = writeln!(out, "{sessions},{precision},{recall}");
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_histogram(path: &Path, hist: &crate::eval::Histogram) -> Result<()> {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (lo, hi, count) in hist.rows() {
        let _ = writeln!(out, "{lo},{hi},{count}");
    }
    write_atomic(path, out.as_bytes())
}

/// Resolves a row's image path against the manifest location.
pub fn patch_path(manifest_path: &Path, row: &ManifestRow) -> PathBuf {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    base.join(&row.image_path)
}

/// Loads the image of one manifest row.
pub fn load_patch(manifest_path: &Path, row: &ManifestRow) -> Result<FacePatch> {
    if row.image_path.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "frame {}:{} has no image",
            row.session_id, row.frame_index
        )));
    }
    let path = patch_path(manifest_path, row);
    let bytes = std::fs::read(&path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    decode_netpbm(&bytes)
}

/// Loads every image in the manifest; rows without a face yield `None`.
pub fn load_patches(manifest_path: &Path, manifest: &Manifest) -> Result<Vec<Option<FacePatch>>> {
    manifest
        .rows
        .iter()
        .map(|row| {
            if row.image_path.is_empty() {
                Ok(None)
            } else {
                load_patch(manifest_path, row).map(Some)
            }
        })
        .collect()
}

/// Writes a generated dataset under `dir`: `images/` with one netpbm file
/// per frame, `manifest.csv`, and `landmarks.csv` covering the frames
/// whose landmarks were available. Returns the manifest.
pub fn write_dataset(dir: &Path, samples: &[SynthSample]) -> Result<Manifest> {
    let images = dir.join("images");
    std::fs::create_dir_all(&images)?;
    let mut rows = Vec::with_capacity(samples.len());
    let mut landmarks = Vec::new();
    for sample in samples {
        let ext = if sample.patch.channels() == 1 { "pgm" } else { "ppm" };
        let image_path = format!("images/{}_f{:05}.{ext}", sample.session_id, sample.frame_index);
        write_atomic(&dir.join(&image_path), &encode_netpbm(&sample.patch))?;
        rows.push(ManifestRow {
            session_id: sample.session_id.clone(),
            subject_id: sample.subject_id.clone(),
            frame_index: sample.frame_index,
            image_path,
            label: sample.label,
            pose: sample
                .landmark_available
                .then(|| [sample.scene.yaw, sample.scene.pitch, sample.scene.roll]),
            landmark_available: sample.landmark_available,
            diagnosis: sample.diagnosis.clone(),
            protocol: sample.protocol.clone(),
        });
        if sample.landmark_available {
            landmarks.push(LandmarkRow {
                session_id: sample.session_id.clone(),
                frame_index: sample.frame_index,
                left: (sample.left_eye.x, sample.left_eye.y),
                right: (sample.right_eye.x, sample.right_eye.y),
                roll_deg: sample.scene.roll,
            });
        }
    }
    let manifest = Manifest::new(rows)?;
    manifest.write(&dir.join("manifest.csv"))?;
    write_landmarks(&dir.join("landmarks.csv"), &landmarks)?;
    Ok(manifest)
}

/// Reads a whole file, labeling any failure with the path.
fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn check_field(field: &str) -> Result<()> {
    if field.contains(',') || field.contains('\n') || field.contains('\r') {
        return Err(Error::Parse(format!("field {field:?} would corrupt unquoted csv")));
    }
    Ok(())
}

/// Non-empty lines with their 1-based numbers; handles trailing `\r`.
fn lines_of(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

fn expect_header(first: Option<(usize, &str)>, header: &str, path: &Path) -> Result<()> {
    match first {
        Some((_, line)) if line == header => Ok(()),
        Some((_, line)) => Err(Error::Parse(format!(
            "{}: expected header {header:?}, found {line:?}",
            path.display()
        ))),
        None => Err(Error::Parse(format!("{}: empty file", path.display()))),
    }
}

fn split_fields(line: &str, count: usize, number: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != count {
        return Err(Error::Parse(format!(
            "line {number}: expected {count} fields, found {}",
            fields.len()
        )));
    }
    Ok(fields)
}

fn parse_usize(field: &str, number: usize) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("line {number}: bad integer {field:?}")))
}

fn parse_f64(field: &str, number: usize) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| Error::Parse(format!("line {number}: bad number {field:?}")))?;
    if !value.is_finite() {
        return Err(Error::Parse(format!("line {number}: non-finite number {field:?}")));
    }
    Ok(value)
}

fn parse_flag(field: &str, number: usize) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse(format!("line {number}: flag {field:?} must be 0 or 1"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthface::{generate_dataset, GeneratorConfig};

    fn sample_rows() -> Vec<ManifestRow> {
        vec![
            ManifestRow {
                session_id: "s0000".into(),
                subject_id: "subj000".into(),
                frame_index: 0,
                image_path: "images/s0000_f00000.ppm".into(),
                label: true,
                pose: Some([12.5, -3.0, 0.25]),
                landmark_available: true,
                diagnosis: "td".into(),
                protocol: "tabletop".into(),
            },
            ManifestRow {
                session_id: "s0000".into(),
                subject_id: "subj000".into(),
                frame_index: 1,
                image_path: "images/s0000_f00001.ppm".into(),
                label: false,
                pose: None,
                landmark_available: false,
                diagnosis: "td".into(),
                protocol: "tabletop".into(),
            },
            ManifestRow {
                session_id: "s0001".into(),
                subject_id: "subj001".into(),
                frame_index: 0,
                image_path: String::new(),
                label: false,
                pose: None,
                landmark_available: false,
                diagnosis: "asd".into(),
                protocol: "floorplay".into(),
            },
        ]
    }

    #[test]
    fn manifest_round_trips_including_missing_pose_and_image() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let manifest = Manifest::new(sample_rows()).unwrap();
        manifest.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(MANIFEST_HEADER));
        // Missing pose serializes as three empty fields.
        assert!(text.contains("s0000_f00001.ppm,0,,,,0,td,tabletop"), "{text}");
        let back = Manifest::read(&path).unwrap();
        assert_eq!(back, manifest);
        // A second write of the re-read manifest is byte-identical.
        back.write(&dir.path().join("again.csv")).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("again.csv")).unwrap());
    }

    #[test]
    fn manifest_rejects_duplicates_partial_pose_and_bad_flags() {
        let mut rows = sample_rows();
        rows.push(rows[0].clone());
        assert!(Manifest::new(rows).is_err());

        let mut rows = sample_rows();
        rows[0].diagnosis = "td,asd".into();
        assert!(Manifest::new(rows).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let write = |body: &str| {
            std::fs::write(&path, format!("{MANIFEST_HEADER}\n{body}\n")).unwrap();
            Manifest::read(&path)
        };
        // Partial pose.
        assert!(write("s0,u0,0,i.ppm,1,5.0,,,1,td,tabletop").is_err());
        // Label outside {0,1}.
        assert!(write("s0,u0,0,i.ppm,2,,,,1,td,tabletop").is_err());
        // Wrong field count.
        assert!(write("s0,u0,0,i.ppm,1").is_err());
        // Wrong header entirely.
        std::fs::write(&path, "a,b,c\n").unwrap();
        assert!(Manifest::read(&path).is_err());
    }

    #[test]
    fn manifest_summaries_group_by_session() {
        let manifest = Manifest::new(sample_rows()).unwrap();
        let metas = manifest.session_metas();
        assert_eq!(metas.len(), 2);
        assert_eq!(metas[0].session_id, "s0000");
        assert_eq!(metas[1].subject_id, "subj001");

        let avail = manifest.availability();
        assert_eq!(avail.len(), 2);
        assert_eq!(avail[0].total_frames, 2);
        assert_eq!(avail[0].face_frames, 2);
        assert_eq!(avail[0].landmark_frames, 1);
        // The s0001 frame has no image.
        assert_eq!(avail[1].face_frames, 0);
    }

    #[test]
    fn landmark_and_score_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lm = vec![LandmarkRow {
            session_id: "s0000".into(),
            frame_index: 3,
            left: (24.5, 30.0),
            right: (40.25, 29.5),
            roll_deg: -2.5,
        }];
        let lm_path = dir.path().join("landmarks.csv");
        write_landmarks(&lm_path, &lm).unwrap();
        assert_eq!(read_landmarks(&lm_path).unwrap(), lm);

        let scores = vec![
            ScoreRow { session_id: "s0".into(), frame_index: 0, truth: true, score: Some(0.75) },
            ScoreRow { session_id: "s0".into(), frame_index: 1, truth: false, score: None },
        ];
        let path = dir.path().join("scores.csv");
        write_scores(&path, &scores).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // Abstention is a trailing empty field.
        assert!(text.contains("s0,1,0,\n"), "{text}");
        assert_eq!(read_scores(&path).unwrap(), scores);
        let frames = scored_frames(&scores);
        assert_eq!(frames[0], ScoredFrame::new(true, Some(0.75)));
        assert_eq!(frames[1], ScoredFrame::new(false, None));
    }

    #[test]
    fn report_and_curve_writers_emit_expected_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let report_path = dir.path().join("report.csv");
        write_report(
            &report_path,
            &[("auc_pr".to_string(), 0.875), ("max_f1".to_string(), 0.8)],
        )
        .unwrap();
        assert_eq!(
            read_report(&report_path).unwrap(),
            vec![("auc_pr".to_string(), 0.875), ("max_f1".to_string(), 0.8)]
        );

        let frames = [
            ScoredFrame::new(true, Some(0.9)),
            ScoredFrame::new(false, Some(0.4)),
            ScoredFrame::new(true, Some(0.4)),
        ];
        let sweep = crate::eval::sweep_thresholds(&frames).unwrap();
        let pr_path = dir.path().join("pr.csv");
        write_pr_curve(&pr_path, &sweep).unwrap();
        let text = std::fs::read_to_string(&pr_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], PR_CURVE_HEADER);
        assert_eq!(lines.len(), 1 + sweep.points.len());
        assert_eq!(lines[1], "0.9,1,0.5");

        let log_path = dir.path().join("train.csv");
        write_training_log(
            &log_path,
            &[TrainLogRow { iteration: 1, lr: 0.005, total_loss: 0.7, ce_loss: 0.69, pose_loss: 0.01 }],
        )
        .unwrap();
        let text = std::fs::read_to_string(&log_path).unwrap();
        assert!(text.contains("1,0.005,0.7,0.69,0.01"));

        let sweep_path = dir.path().join("sweep.csv");
        write_sweep_curve(&sweep_path, &[(5, 0.5, 0.6), (30, 0.8, 0.7)]).unwrap();
        let text = std::fs::read_to_string(&sweep_path).unwrap();
        assert_eq!(text, format!("{SWEEP_CURVE_HEADER}\n5,0.5,0.6\n30,0.8,0.7\n"));

        let mut hist = crate::eval::Histogram::new(0.0, 1.0, 2);
        hist.add(0.25);
        let hist_path = dir.path().join("hist.csv");
        write_histogram(&hist_path, &hist).unwrap();
        assert_eq!(
            std::fs::read_to_string(&hist_path).unwrap(),
            format!("{HISTOGRAM_HEADER}\n0,0.5,1\n0.5,1,0\n")
        );
    }

    #[test]
    fn generated_dataset_round_trips_through_disk() {
        let config = GeneratorConfig::base(2, 6);
        let samples = generate_dataset(&config, 99).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(dir.path(), &samples).unwrap();
        assert_eq!(manifest.rows.len(), 12);

        let manifest_path = dir.path().join("manifest.csv");
        let back = Manifest::read(&manifest_path).unwrap();
        assert_eq!(back, manifest);
        let patches = load_patches(&manifest_path, &back).unwrap();
        assert_eq!(patches.len(), 12);
        for (patch, sample) in patches.iter().zip(&samples) {
            let patch = patch.as_ref().expect("every generated frame has an image");
            assert_eq!(patch.pixels(), sample.patch.pixels());
        }
        // Landmark sidecar covers exactly the landmark-available rows.
        let lms = read_landmarks(&dir.path().join("landmarks.csv")).unwrap();
        assert_eq!(lms.len(), samples.iter().filter(|s| s.landmark_available).count());
        // Pose present in the manifest iff landmarks were available.
        for (row, sample) in back.rows.iter().zip(&samples) {
            assert_eq!(row.pose.is_some(), sample.landmark_available);
            if let Some(pose) = row.pose {
                assert_eq!(pose[0], sample.scene.yaw);
            }
        }
    }

    #[test]
    fn missing_image_rows_load_as_none_and_refuse_single_load() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::new(sample_rows()).unwrap();
        let manifest_path = dir.path().join("manifest.csv");
        // Only write the two images that exist.
        std::fs::create_dir_all(dir.path().join("images")).unwrap();
        for row in &manifest.rows[..2] {
            let patch = FacePatch::filled(16, 16, 3, 128).unwrap();
            write_atomic(&patch_path(&manifest_path, row), &encode_netpbm(&patch)).unwrap();
        }
        let patches = load_patches(&manifest_path, &manifest).unwrap();
        assert!(patches[0].is_some() && patches[1].is_some());
        assert!(patches[2].is_none());
        assert!(load_patch(&manifest_path, &manifest.rows[2]).is_err());
    }
}
