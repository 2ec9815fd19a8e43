use super::patch::EyePatch;

/// Cell edge in pixels.
pub const HOG_CELL: usize = 8;
/// Unsigned orientation bins over [0, 180).
pub const HOG_ORIENTATIONS: usize = 9;
/// Cells fitting a 73x37 eye patch: 9 x 4. Blocks of 2x2 cells at stride 1
/// give 8 x 3 = 24 blocks of 36 values = 864.
pub const HOG_DIM_PER_EYE: usize = 864;

const CELLS_X: usize = 73 / HOG_CELL; // 9
const CELLS_Y: usize = 37 / HOG_CELL; // 4
const BLOCKS_X: usize = CELLS_X - 1; // 8
const BLOCKS_Y: usize = CELLS_Y - 1; // 3
const CLIP: f64 = 0.2;

/// HOG descriptor of one eye patch.
///
/// Plain Dalal-Triggs: central-difference gradients with replicated borders,
/// magnitude votes linearly interpolated between the two nearest unsigned
/// orientation bins, 8x8 cells, 2x2 blocks at stride 1, L2-hys per block
/// (normalize, clip at 0.2, renormalize). Rows of blocks are emitted top to
/// bottom, blocks left to right, cells within a block row-major. Pixels past
/// the last full cell (columns 72, rows 32-36) are ignored.
///
/// Constant patches produce the all-zero vector. Adding a constant offset
/// leaves the descriptor unchanged, scaling intensities scales gradients
/// uniformly and normalization cancels it.
pub fn extract_hog(eye: &EyePatch) -> Vec<f64> {
    let w = eye.width();
    let h = eye.height();
    // per-cell orientation histograms
    let mut cells = vec![[0.0f64; HOG_ORIENTATIONS]; CELLS_X * CELLS_Y];
    for y in 0..CELLS_Y * HOG_CELL {
        for x in 0..CELLS_X * HOG_CELL {
            let xm = if x == 0 { 0 } else { x - 1 };
            let xp = if x + 1 >= w { w - 1 } else { x + 1 };
            let ym = if y == 0 { 0 } else { y - 1 };
            let yp = if y + 1 >= h { h - 1 } else { y + 1 };
            let gx = eye.get(xp, y) as f64 - eye.get(xm, y) as f64;
            let gy = eye.get(x, yp) as f64 - eye.get(x, ym) as f64;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            if theta >= std::f64::consts::PI {
                theta = 0.0;
            }
            let bin_width = std::f64::consts::PI / HOG_ORIENTATIONS as f64;
            let pos = theta / bin_width - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = lo.rem_euclid(HOG_ORIENTATIONS as f64) as usize;
            let b1 = (b0 + 1) % HOG_ORIENTATIONS;
            let cell = (y / HOG_CELL) * CELLS_X + (x / HOG_CELL);
            cells[cell][b0] += mag * (1.0 - frac);
            cells[cell][b1] += mag * frac;
        }
    }

    // block normalization
    let mut out = Vec::with_capacity(HOG_DIM_PER_EYE);
    for by in 0..BLOCKS_Y {
        for bx in 0..BLOCKS_X {
            let mut block = [0.0f64; 4 * HOG_ORIENTATIONS];
            for (slot, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                let cell = &cells[(by + dy) * CELLS_X + (bx + dx)];
                block[slot * HOG_ORIENTATIONS..(slot + 1) * HOG_ORIENTATIONS]
                    .copy_from_slice(cell);
            }
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                out.extend_from_slice(&block); // all zeros
                continue;
            }
            for v in &mut block {
                *v = (*v / norm).min(CLIP);
            }
            let renorm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut block {
                *v /= renorm;
            }
            out.extend_from_slice(&block);
        }
    }
    debug_assert_eq!(out.len(), HOG_DIM_PER_EYE);
    out
}
