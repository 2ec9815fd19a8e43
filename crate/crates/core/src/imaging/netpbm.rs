use super::FacePatch;
use crate::numerics::write_atomic;
use crate::{Error, Result};
use std::path::Path;

/// Encodes a patch as binary Netpbm: P5 for grayscale, P6 for RGB, maxval
/// 255, header `P?\n<width> <height>\n255\n`. The writer always emits this
/// exact header so outputs are byte-reproducible.
pub fn encode_netpbm(patch: &FacePatch) -> Vec<u8> {
    let tag = if patch.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{tag}\n{} {}\n255\n", patch.width(), patch.height()).into_bytes();
    out.extend_from_slice(patch.pixels());
    out
}

/// Decodes binary P5/P6 data. Whitespace runs and `#` comments are accepted
/// in the header, the maxval must be 255 and the body must match the header
/// exactly.
pub fn decode_netpbm(bytes: &[u8]) -> Result<FacePatch> {
    let channels = match bytes.get(0..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::Parse("not a binary PGM/PPM file".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::Parse("truncated netpbm header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == start {
            return Err(Error::Parse("malformed netpbm header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| Error::Parse("netpbm header field out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Parse(format!("netpbm maxval must be 255, got {maxval}")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Parse("missing separator after netpbm header".into())),
    }
    let body = &bytes[pos..];
    let expected = width * height * channels;
    if body.len() != expected {
        return Err(Error::Parse(format!(
            "netpbm body: expected {expected} bytes, found {}",
            body.len()
        )));
    }
    FacePatch::new(width, height, channels, body.to_vec())
}

/// Writes a patch atomically as PGM (grayscale) or PPM (RGB).
pub fn save_patch(path: &Path, patch: &FacePatch) -> Result<()> {
    write_atomic(path, &encode_netpbm(patch))
}

pub fn load_patch(path: &Path) -> Result<FacePatch> {
    decode_netpbm(&std::fs::read(path)?)
}
