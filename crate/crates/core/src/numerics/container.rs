use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Model-type tags stored in the container header.
pub mod tags {
    pub const PCA: u32 = 1;
    pub const MDA: u32 = 2;
    pub const GMM: u32 = 3;
    pub const FOREST: u32 = 4;
    pub const LINEAR_SVM: u32 = 5;
    pub const ONLINE_LOGREG: u32 = 6;
    pub const PICNN: u32 = 7;
    pub const PEEC: u32 = 8;
    pub const GAZELOCK: u32 = 9;
}

const MAGIC: [u8; 4] = *b"GCM1";

/// On-disk model container. Every model in the crate serializes to the same
/// layout: `b"GCM1"`, a little-endian u32 type tag, a little-endian u64 count
/// of f64 payload values, then the values themselves. All structure (shapes,
/// counts, node indices) is encoded inside the payload.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub tag: u32,
    pub values: Vec<f64>,
}

impl Container {
    pub fn new(tag: u32, values: Vec<f64>) -> Self {
        Container { tag, values }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.values.len() * 8);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.tag.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Parse("model container shorter than its header".into()));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Parse("bad model container magic".into()));
        }
        let tag = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() != count * 8 {
            return Err(Error::Parse(format!(
                "model container payload: expected {} values, found {} bytes",
                count,
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Container { tag, values })
    }

    /// Writes atomically: the bytes land in a sibling temp file first and are
    /// renamed into place, so readers never observe a half-written model.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

/// Temp-file-and-rename write used for every artifact the crate produces.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("cannot write to {}", path.display())))?;
    let mut tmp = std::path::PathBuf::from(dir.unwrap_or(Path::new(".")));
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    tmp.push(tmp_name);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Uniform save/load for every model type: one container per file, the tag
/// identifying the model kind, all structure flattened into the payload.
pub trait ModelIo: Sized {
    const TAG: u32;

    fn encode(&self, p: &mut Packer);
    fn decode(u: &mut Unpacker) -> Result<Self>;

    fn to_container(&self) -> Container {
        let mut p = Packer::new();
        self.encode(&mut p);
        Container::new(Self::TAG, p.into_values())
    }

    fn from_container(c: &Container) -> Result<Self> {
        if c.tag != Self::TAG {
            return Err(Error::Parse(format!(
                "model container tag {} does not match expected {}",
                c.tag,
                Self::TAG
            )));
        }
        let mut u = Unpacker::new(&c.values);
        let model = Self::decode(&mut u)?;
        u.finish()?;
        Ok(model)
    }

    fn save(&self, path: &Path) -> Result<()> {
        self.to_container().write_to(path)
    }

    fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read_from(path)?)
    }
}

/// Append-style encoder for model payloads. Lengths and indices are stored as
/// exactly-representable f64 values.
#[derive(Default)]
pub struct Packer {
    values: Vec<f64>,
}

impl Packer {
    pub fn new() -> Self {
        Packer::default()
    }

    pub fn push(&mut self, v: f64) {
        self.values.push(v);
    }

    pub fn push_usize(&mut self, v: usize) {
        debug_assert!(v < (1usize << 53), "usize too large for exact f64");
        self.values.push(v as f64);
    }

    pub fn push_slice(&mut self, vs: &[f64]) {
        self.values.extend_from_slice(vs);
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Cursor over a container payload with bounds-checked reads.
pub struct Unpacker<'a> {
    values: &'a [f64],
    pos: usize,
}

impl<'a> Unpacker<'a> {
    pub fn new(values: &'a [f64]) -> Self {
        Unpacker { values, pos: 0 }
    }

    pub fn take(&mut self) -> Result<f64> {
        let v = self
            .values
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Parse("model payload ended early".into()))?;
        self.pos += 1;
        Ok(v)
    }

    pub fn take_usize(&mut self) -> Result<usize> {
        let v = self.take()?;
        if v < 0.0 || v.fract() != 0.0 || v >= (1u64 << 53) as f64 {
            return Err(Error::Parse(format!("expected a count in model payload, found {v}")));
        }
        Ok(v as usize)
    }

    pub fn take_slice(&mut self, n: usize) -> Result<&'a [f64]> {
        if self.pos + n > self.values.len() {
            return Err(Error::Parse("model payload ended early".into()));
        }
        let s = &self.values[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.values.len() {
            return Err(Error::Parse(format!(
                "model payload has {} unread values",
                self.values.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let c = Container::new(tags::PCA, vec![0.0, -1.5, f64::MIN_POSITIVE, 1e300, -0.0]);
        let back = Container::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.tag, tags::PCA);
        assert_eq!(back.values.len(), 5);
        for (a, b) in c.values.iter().zip(&back.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_layout_is_fixed() {
        let c = Container::new(7, vec![1.0]);
        let bytes = c.to_bytes();
        assert_eq!(&bytes[0..4], b"GCM1");
        assert_eq!(bytes[4..8], 7u32.to_le_bytes());
        assert_eq!(bytes[8..16], 1u64.to_le_bytes());
        assert_eq!(bytes.len(), 24);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = Container::new(1, vec![2.0, 3.0]).to_bytes();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Container::from_bytes(&wrong).is_err());
        bytes.pop();
        assert!(Container::from_bytes(&bytes).is_err());
        assert!(Container::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let c = Container::new(tags::GMM, vec![1.0, 2.0]);
        c.write_to(&path).unwrap();
        assert_eq!(Container::read_from(&path).unwrap(), c);
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn unpacker_checks_bounds_and_leftovers() {
        let mut p = Packer::new();
        p.push_usize(2);
        p.push_slice(&[1.0, 2.0]);
        let values = p.into_values();
        let mut u = Unpacker::new(&values);
        let n = u.take_usize().unwrap();
        assert_eq!(u.take_slice(n).unwrap(), &[1.0, 2.0]);
        u.finish().unwrap();

        let mut u2 = Unpacker::new(&values);
        let _ = u2.take().unwrap();
        assert!(u2.finish().is_err());
        assert!(u2.take_slice(5).is_err());
    }
}
