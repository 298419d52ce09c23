use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A named contiguous slice of a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Flat parameter vector partitioned into named segments, with a matching gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
    segments: Vec<Segment>,
}

const MAGIC: &[u8; 4] = b"MAGC";
const VERSION: u32 = 1;

impl ParameterSet {
    /// Zero-initialised parameters laid out in the given `(name, len)` order.
    pub fn new<S: Into<String>>(layout: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut segments: Vec<Segment> = Vec::new();
        let mut offset = 0;
        for (name, len) in layout {
            let name = name.into();
            if segments.iter().any(|s| s.name == name) {
                return Err(Error::invalid(format!("duplicate segment {name}")));
            }
            segments.push(Segment { name, offset, len });
            offset += len;
        }
        Ok(Self {
            values: vec![0.0; offset],
            grads: vec![0.0; offset],
            segments,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Result<&Segment> {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::invalid(format!("no parameter segment {name}")))
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        let s = self.segment(name)?;
        Ok(&self.values[s.offset..s.offset + s.len])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let s = self.segment(name)?.clone();
        Ok(&mut self.values[s.offset..s.offset + s.len])
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.segments.len() as u32).to_le_bytes())?;
        for s in &self.segments {
            w.write_all(&(s.name.len() as u16).to_le_bytes())?;
            w.write_all(s.name.as_bytes())?;
            w.write_all(&(s.offset as u64).to_le_bytes())?;
            w.write_all(&(s.len as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::format("parameter checkpoint", m.to_string());
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::io("<checkpoint reader>", e))?;
        let mut at = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(at..at + n).ok_or_else(|| bad("truncated file"))?;
            at += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut segments = Vec::with_capacity(count);
        let mut total = 0usize;
        for _ in 0..count {
            let n = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(n)?.to_vec()).map_err(|_| bad("segment name is not UTF-8"))?;
            let offset = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            if offset != total {
                return Err(bad("segments do not partition the vector"));
            }
            total += len;
            segments.push(Segment { name, offset, len });
        }
        let raw = take(total * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if at != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            grads: vec![0.0; values.len()],
            values,
            segments,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}
