use crate::{Error, Result};

pub const EYE_PATCH_WIDTH: usize = 73;
pub const EYE_PATCH_HEIGHT: usize = 37;

/// Face patch: row-major, channel-interleaved u8 pixels, 1 (gray) or 3 (RGB)
/// channels, at least 8 pixels on each side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FacePatch {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl FacePatch {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width < 8 || height < 8 {
            return Err(Error::DegenerateInput(format!(
                "patch must be at least 8x8, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::DegenerateInput(format!("patch channels must be 1 or 3, got {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "patch {width}x{height}x{channels} wants {} bytes, got {}",
                width * height * channels,
                pixels.len()
            )));
        }
        Ok(FacePatch { width, height, channels, pixels })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.pixels[(y * self.width + x) * self.channels + c] = v;
    }

    /// Luma conversion with ITU-R 601 weights; grayscale input is returned
    /// unchanged.
    pub fn to_gray(&self) -> FacePatch {
        if self.channels == 1 {
            return self.clone();
        }
        let mut pixels = Vec::with_capacity(self.width * self.height);
        for px in self.pixels.chunks_exact(3) {
            let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
            pixels.push(y.round().clamp(0.0, 255.0) as u8);
        }
        FacePatch { width: self.width, height: self.height, channels: 1, pixels }
    }

    /// Bilinear at fractional coordinates with mirrored taps outside the
    /// image. `x`/`y` are pixel-center coordinates.
    pub(crate) fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let tap = |ix: i64, iy: i64| -> f64 {
            let mx = mirror_index(ix, self.width);
            let my = mirror_index(iy, self.height);
            self.get(mx, my, c) as f64
        };
        let (x0, y0) = (x0 as i64, y0 as i64);
        let v00 = tap(x0, y0);
        let v10 = tap(x0 + 1, y0);
        let v01 = tap(x0, y0 + 1);
        let v11 = tap(x0 + 1, y0 + 1);
        let top = v00 * (1.0 - fx) + v10 * fx;
        let bot = v01 * (1.0 - fx) + v11 * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Bilinear resize, pixel-center aligned. A constant image resizes to the
    /// same constant at any target size.
    pub fn resize(&self, new_width: usize, new_height: usize) -> Result<FacePatch> {
        if new_width < 8 || new_height < 8 {
            return Err(Error::DegenerateInput(format!(
                "resize target must be at least 8x8, got {new_width}x{new_height}"
            )));
        }
        let sx = self.width as f64 / new_width as f64;
        let sy = self.height as f64 / new_height as f64;
        let mut pixels = vec![0u8; new_width * new_height * self.channels];
        for y in 0..new_height {
            let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            for x in 0..new_width {
                let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                for c in 0..self.channels {
                    let v = self.sample_bilinear(src_x, src_y, c);
                    pixels[(y * new_width + x) * self.channels + c] =
                        v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        FacePatch::new(new_width, new_height, self.channels, pixels)
    }
}

/// Mirrors an index into [0, n): `-1 -> 1`, `n -> n - 2`. Valid for
/// excursions up to one image size, which covers every resampling path here.
pub(crate) fn mirror_index(i: i64, n: usize) -> usize {
    let last = (n - 1) as i64;
    let m = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    m.clamp(0, last) as usize
}

/// Eye patch: grayscale, exactly 73x37. The fixed size is what the HOG
/// layout and the raw-intensity baseline feature lengths rely on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EyePatch {
    pixels: Vec<u8>,
}

impl EyePatch {
    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != EYE_PATCH_WIDTH * EYE_PATCH_HEIGHT {
            return Err(Error::ShapeMismatch(format!(
                "eye patch wants {} bytes, got {}",
                EYE_PATCH_WIDTH * EYE_PATCH_HEIGHT,
                pixels.len()
            )));
        }
        Ok(EyePatch { pixels })
    }

    pub fn width(&self) -> usize {
        EYE_PATCH_WIDTH
    }

    pub fn height(&self) -> usize {
        EYE_PATCH_HEIGHT
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * EYE_PATCH_WIDTH + x]
    }

    pub fn to_patch(&self) -> FacePatch {
        FacePatch::new(EYE_PATCH_WIDTH, EYE_PATCH_HEIGHT, 1, self.pixels.clone()).unwrap()
    }
}

/// Peak signal-to-noise ratio between two same-shape patches, in dB.
/// Identical patches give infinity.
pub fn psnr(a: &FacePatch, b: &FacePatch) -> Result<f64> {
    if a.width != b.width || a.height != b.height || a.channels != b.channels {
        return Err(Error::ShapeMismatch("psnr needs same-shape patches".into()));
    }
    let mse: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.pixels.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}
