use super::patch::{mirror_index, FacePatch};
use crate::numerics::Rng;

/// One concrete augmentation: horizontal flip, rotation about the patch
/// center, then photometric jitter. The default spec is the exact identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentSpec {
    pub flip: bool,
    pub rotation_deg: f64,
    pub brightness_delta: f64,
    pub contrast_scale: f64,
    /// Additive per-channel offsets; index 0 also applies to grayscale.
    pub channel_jitter: [f64; 3],
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            flip: false,
            rotation_deg: 0.0,
            brightness_delta: 0.0,
            contrast_scale: 1.0,
            channel_jitter: [0.0; 3],
        }
    }
}

/// Sampling ranges for random augmentation specs.
#[derive(Clone, Copy, Debug)]
pub struct AugmentRanges {
    pub max_rotation_deg: f64,
    pub max_brightness_delta: f64,
    pub contrast: (f64, f64),
    pub max_channel_jitter: f64,
    pub flip_probability: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        AugmentRanges {
            max_rotation_deg: 10.0,
            max_brightness_delta: 20.0,
            contrast: (0.9, 1.1),
            max_channel_jitter: 5.0,
            flip_probability: 0.5,
        }
    }
}

/// Draws a random spec within `ranges`.
pub fn sample_augment_spec(ranges: &AugmentRanges, rng: &mut Rng) -> AugmentSpec {
    AugmentSpec {
        flip: rng.next_bool(ranges.flip_probability),
        rotation_deg: rng.range_f64(-ranges.max_rotation_deg, ranges.max_rotation_deg),
        brightness_delta: rng.range_f64(-ranges.max_brightness_delta, ranges.max_brightness_delta),
        contrast_scale: rng.range_f64(ranges.contrast.0, ranges.contrast.1),
        channel_jitter: [
            rng.range_f64(-ranges.max_channel_jitter, ranges.max_channel_jitter),
            rng.range_f64(-ranges.max_channel_jitter, ranges.max_channel_jitter),
            rng.range_f64(-ranges.max_channel_jitter, ranges.max_channel_jitter),
        ],
    }
}

/// Applies a spec: flip, then rotation (bilinear, mirrored borders), then
/// `v -> (v - 128) * contrast + 128 + brightness + jitter[channel]` clamped
/// to [0, 255]. A zero rotation skips resampling entirely, so the default
/// spec returns a bit-identical copy.
pub fn augment(patch: &FacePatch, spec: &AugmentSpec) -> FacePatch {
    let (w, h, ch) = (patch.width(), patch.height(), patch.channels());

    let mut current = patch.clone();
    if spec.flip {
        let mut flipped = patch.clone();
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    flipped.set(x, y, c, current.get(w - 1 - x, y, c));
                }
            }
        }
        current = flipped;
    }

    if spec.rotation_deg != 0.0 {
        let theta = spec.rotation_deg.to_radians();
        let (sin_t, cos_t) = theta.sin_cos();
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let mut rotated = current.clone();
        for y in 0..h {
            for x in 0..w {
                // inverse map: rotate output coords back into the source
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let sx = cx + cos_t * dx + sin_t * dy;
                let sy = cy - sin_t * dx + cos_t * dy;
                for c in 0..ch {
                    let v = sample_mirrored(&current, sx, sy, c);
                    rotated.set(x, y, c, v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        current = rotated;
    }

    let photometric = spec.brightness_delta != 0.0
        || spec.contrast_scale != 1.0
        || spec.channel_jitter.iter().any(|&j| j != 0.0);
    if photometric {
        let mut out = current.clone();
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let v = current.get(x, y, c) as f64;
                    let adjusted = (v - 128.0) * spec.contrast_scale
                        + 128.0
                        + spec.brightness_delta
                        + spec.channel_jitter[c];
                    out.set(x, y, c, adjusted.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        current = out;
    }

    current
}

/// Bilinear sample allowing taps slightly outside the image; rotation pulls
/// corners out by at most (sqrt(2) - 1) / 2 of the size, well inside mirror
/// range.
fn sample_mirrored(patch: &FacePatch, x: f64, y: f64, c: usize) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let tap = |ix: i64, iy: i64| -> f64 {
        patch.get(mirror_index(ix, patch.width()), mirror_index(iy, patch.height()), c) as f64
    };
    let (x0, y0) = (x0 as i64, y0 as i64);
    let v00 = tap(x0, y0);
    let v10 = tap(x0 + 1, y0);
    let v01 = tap(x0, y0 + 1);
    let v11 = tap(x0 + 1, y0 + 1);
    (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
}
