//! Image-grid renderings of network filters and responses.

use super::PicnnModel;
use crate::imaging::FacePatch;
use crate::real::Real;
use crate::{Error, Result};

/// Min-max normalizes `values` to 0..=255; a flat slice maps to all zeros.
fn normalize_bytes<T: Real>(values: &[T]) -> Vec<u8> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v.as_f64());
        hi = hi.max(v.as_f64());
    }
    let span = hi - lo;
    if !(span > 1e-12) {
        return vec![0; values.len()];
    }
    values.iter().map(|v| ((v.as_f64() - lo) / span * 255.0).round() as u8).collect()
}

/// Tile grid geometry: near-square, tiles separated by one-pixel gaps.
fn grid_shape(tiles: usize) -> (usize, usize) {
    let cols = (tiles as f64).sqrt().ceil() as usize;
    let rows = tiles.div_ceil(cols.max(1));
    (rows, cols)
}

/// Renders the first convolution's filters as an RGB contact sheet, each
/// filter min-max normalized on its own. `upscale` is a nearest-neighbor
/// magnification factor and is raised as needed to honor the minimum image
/// size.
pub fn first_layer_filter_grid<T: Real>(model: &PicnnModel<T>, upscale: usize) -> Result<FacePatch> {
    let conv = &model.convs[0];
    let k = conv.spec.k;
    let oc = conv.spec.out_channels;
    let (rows, cols) = grid_shape(oc);
    let mut scale = upscale.max(1);
    while (k * scale + 1) * rows.min(cols) < 9 {
        scale += 1;
    }
    let tile = k * scale;
    let width = cols * tile + (cols - 1);
    let height = rows * tile + (rows - 1);
    let mut image = FacePatch::filled(width, height, 3, 0)?;
    for f in 0..oc {
        let weights = &conv.weights[f * conv.spec.patch_len()..(f + 1) * conv.spec.patch_len()];
        let bytes = normalize_bytes(weights);
        let (r, c) = (f / cols, f % cols);
        let (oy, ox) = (r * (tile + 1), c * (tile + 1));
        for y in 0..tile {
            for x in 0..tile {
                for ch in 0..3 {
                    // Filter planes are stored channel-major: (ch, ky, kx).
                    let v = bytes[(ch * k + y / scale) * k + x / scale];
                    image.set(ox + x, oy + y, ch, v);
                }
            }
        }
    }
    Ok(image)
}

/// Runs the network on one patch and renders the post-activation response
/// maps of convolution `conv_index` (zero-based) as a grayscale contact
/// sheet, one min-max-normalized tile per channel.
pub fn response_grid<T: Real>(
    model: &PicnnModel<T>,
    patch: &FacePatch,
    conv_index: usize,
) -> Result<FacePatch> {
    if conv_index >= model.convs.len() {
        return Err(Error::OutOfBounds(format!(
            "convolution {conv_index} of {}",
            model.convs.len()
        )));
    }
    let mut input = vec![T::zero(); model.input_len()];
    model.write_input(patch, &mut input)?;
    let cache = model.forward_train(&input, 1);
    let spec = &model.convs[conv_index].spec;
    let (h, w, chans) = (spec.out_h(), spec.out_w(), spec.out_channels);
    let maps = &cache.conv_out[conv_index];
    let (rows, cols) = grid_shape(chans);
    let width = (cols * (w + 1) - 1).max(8);
    let height = (rows * (h + 1) - 1).max(8);
    let mut image = FacePatch::filled(width, height, 1, 0)?;
    for ch in 0..chans {
        let bytes = normalize_bytes(&maps[ch * h * w..(ch + 1) * h * w]);
        let (r, c) = (ch / cols, ch % cols);
        let (oy, ox) = (r * (h + 1), c * (w + 1));
        for y in 0..h {
            for x in 0..w {
                image.set(ox + x, oy + y, 0, bytes[y * w + x]);
            }
        }
    }
    Ok(image)
}
