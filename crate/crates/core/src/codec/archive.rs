//! OTWA weight archives.
//!
//! Layout, little-endian, no padding:
//!
//! ```text
//! "OTWA" | version u32 = 1 | meta_len u32 | meta (UTF-8 JSON) | count u32
//! per tensor: name_len u16 | name | ndim u8 | dims u32 × ndim | f32 × prod(dims)
//! ```
//!
//! The metadata text is kept verbatim and tensors keep their file order, so
//! saving a loaded archive reproduces the input bytes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OTWA";
pub const VERSION: u32 = 1;

/// Dense f32 tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim(format!("shape {shape:?} needs {expected} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Input normalization applied before encoding and undone after decoding:
/// `x' = (x − mean) · scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub mean: [f32; 3],
    #[serde(default = "unit_scale")]
    pub scale: f32,
}

fn unit_scale() -> f32 {
    1.0
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self { mean: [0.0; 3], scale: 1.0 }
    }
}

/// Tensor names a target layer needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    #[serde(default)]
    pub encoder: Vec<String>,
    #[serde(default)]
    pub decoder: Vec<String>,
}

/// Parsed form of the JSON metadata block. Unknown keys are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<Preprocessing>,
    /// Keyed by target layer, "1" through "5".
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub layers: BTreeMap<String, LayerManifest>,
}

impl ArchiveMetadata {
    pub fn layer(&self, index: usize) -> Option<&LayerManifest> {
        self.layers.get(&index.to_string())
    }
}

/// Immutable named tensor store.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightArchive {
    version: u32,
    metadata_text: String,
    metadata: ArchiveMetadata,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl WeightArchive {
    /// Builds an archive, validating unique names and the layer manifest.
    pub fn new(metadata_text: String, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let metadata: ArchiveMetadata = if metadata_text.trim().is_empty() {
            ArchiveMetadata::default()
        } else {
            serde_json::from_str(&metadata_text).map_err(|e| Error::Format(format!("metadata: {e}")))?
        };
        let mut index = HashMap::with_capacity(tensors.len());
        let mut names = Vec::with_capacity(tensors.len());
        let mut values = Vec::with_capacity(tensors.len());
        for (name, tensor) in tensors {
            if u16::try_from(name.len()).is_err() || u8::try_from(tensor.shape.len()).is_err() {
                return Err(Error::Format(format!("tensor {name:?} exceeds header limits")));
            }
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(Error::Format(format!("duplicate tensor name {name:?}")));
            }
            names.push(name);
            values.push(tensor);
        }
        for (key, layer) in &metadata.layers {
            if !matches!(key.as_str(), "1" | "2" | "3" | "4" | "5") {
                return Err(Error::Format(format!("manifest layer key {key:?} not in 1..5")));
            }
            if let Some(missing) = layer.encoder.iter().chain(&layer.decoder).find(|n| !index.contains_key(*n)) {
                return Err(Error::IncompleteArchive(format!("layer {key} lists missing tensor {missing:?}")));
            }
        }
        Ok(Self { version: VERSION, metadata_text, metadata, names, tensors: values, index })
    }

    pub fn with_metadata(metadata: &ArchiveMetadata, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let text = serde_json::to_string(metadata).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(text, tensors)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn metadata(&self) -> &ArchiveMetadata {
        &self.metadata
    }

    pub fn metadata_text(&self) -> &str {
        &self.metadata_text
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    /// Like [`get`](Self::get), but a missing name is an incomplete archive.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::IncompleteArchive(format!("missing tensor {name:?}")))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let meta_len = r.u32("metadata length")? as usize;
        let metadata_text = std::str::from_utf8(r.take(meta_len, "metadata")?)
            .map_err(|_| Error::Format("metadata is not UTF-8".into()))?
            .to_owned();
        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_owned();
            let ndim = r.u8("ndim")? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32("dims")? as usize);
            }
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::Format(format!("tensor {name:?} shape overflows")))?;
            let raw = r.take(count, &name)?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            tensors.push((name, Tensor { shape, data }));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Self::new(metadata_text, tensors)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.tensors.iter().map(|t| t.data.len() * 4 + t.shape.len() * 4).sum();
        let mut out = Vec::with_capacity(16 + self.metadata_text.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.metadata_text.len() as u32).to_le_bytes());
        out.extend_from_slice(self.metadata_text.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in self.names.iter().zip(&self.tensors) {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!("{what}: need {n} bytes at offset {}, have {}", self.pos, self.bytes.len() - self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
