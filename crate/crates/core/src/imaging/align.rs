use super::patch::{EyePatch, FacePatch, EYE_PATCH_HEIGHT, EYE_PATCH_WIDTH};
use crate::{Error, Result};

/// Image-plane point, pixel-center coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }
}

/// Fraction of the source patch each crop may reach past a border via
/// mirrored taps before the crop counts as out of bounds.
const PAD_LIMIT: f64 = 0.25;

/// Crop width in the source image, as a multiple of the inter-eye distance.
const CROP_WIDTH_FACTOR: f64 = 2.2;

/// Cuts roll-upright 73x37 eye patches around both eye centers.
///
/// The patch is conceptually rotated by `-roll_deg` about the eye midpoint so
/// the eye axis comes out horizontal, then a window `2.2 x` the inter-eye
/// distance wide (height scaled by 37/73) is resampled around each rotated
/// eye center. Both steps fuse into one bilinear pass. With `roll_deg == 0`
/// the mapping is a pure axis-aligned scale.
///
/// Taps may mirror past the borders by up to 25% of the patch size; crops
/// needing more fail with `OutOfBounds`.
pub fn align_eyes(
    patch: &FacePatch,
    left_eye: Point2,
    right_eye: Point2,
    roll_deg: f64,
) -> Result<(EyePatch, EyePatch)> {
    let (w, h) = (patch.width() as f64, patch.height() as f64);
    for (name, p) in [("left", left_eye), ("right", right_eye)] {
        if p.x < 0.0 || p.y < 0.0 || p.x > w - 1.0 || p.y > h - 1.0 {
            return Err(Error::OutOfBounds(format!(
                "{name} eye ({}, {}) outside {w}x{h} patch",
                p.x, p.y
            )));
        }
    }
    if roll_deg.abs() > 90.0 {
        return Err(Error::DegenerateInput(format!("roll {roll_deg} outside +-90 degrees")));
    }
    let ied = ((right_eye.x - left_eye.x).powi(2) + (right_eye.y - left_eye.y).powi(2)).sqrt();
    if ied < 1.0 {
        return Err(Error::DegenerateInput(format!("inter-eye distance {ied} below 1 pixel")));
    }

    let gray = patch.to_gray();
    let mid = Point2::new((left_eye.x + right_eye.x) / 2.0, (left_eye.y + right_eye.y) / 2.0);
    let theta = -roll_deg.to_radians();
    let (sin_f, cos_f) = theta.sin_cos(); // forward: patch -> upright frame
    let rot_fwd = |p: Point2| -> Point2 {
        let dx = p.x - mid.x;
        let dy = p.y - mid.y;
        Point2::new(mid.x + cos_f * dx - sin_f * dy, mid.y + sin_f * dx + cos_f * dy)
    };
    // inverse rotation: upright frame -> patch
    let rot_inv = |p: Point2| -> Point2 {
        let dx = p.x - mid.x;
        let dy = p.y - mid.y;
        Point2::new(mid.x + cos_f * dx + sin_f * dy, mid.y - sin_f * dx + cos_f * dy)
    };

    let scale = (CROP_WIDTH_FACTOR * ied) / EYE_PATCH_WIDTH as f64;
    let max_x = (w - 1.0) + PAD_LIMIT * w;
    let min_x = -(PAD_LIMIT * w);
    let max_y = (h - 1.0) + PAD_LIMIT * h;
    let min_y = -(PAD_LIMIT * h);

    let mut crops = Vec::with_capacity(2);
    for eye in [left_eye, right_eye] {
        let center = rot_fwd(eye);
        let mut pixels = Vec::with_capacity(EYE_PATCH_WIDTH * EYE_PATCH_HEIGHT);
        for v in 0..EYE_PATCH_HEIGHT {
            for u in 0..EYE_PATCH_WIDTH {
                let up = Point2::new(
                    center.x + (u as f64 - (EYE_PATCH_WIDTH as f64 - 1.0) / 2.0) * scale,
                    center.y + (v as f64 - (EYE_PATCH_HEIGHT as f64 - 1.0) / 2.0) * scale,
                );
                let src = rot_inv(up);
                if src.x < min_x || src.x > max_x || src.y < min_y || src.y > max_y {
                    return Err(Error::OutOfBounds(format!(
                        "eye crop needs ({:.1}, {:.1}), beyond the 25% padding limit",
                        src.x, src.y
                    )));
                }
                let val = gray.sample_bilinear(src.x, src.y, 0);
                pixels.push(val.round().clamp(0.0, 255.0) as u8);
            }
        }
        crops.push(EyePatch::from_pixels(pixels)?);
    }
    let right = crops.pop().unwrap();
    let left = crops.pop().unwrap();
    Ok((left, right))
}
