//! LMEC v1 weight container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "LMEC" | u32 version | u64 manifest_len | manifest JSON | data region
//! ```
//!
//! The manifest lists every tensor with an explicit `offset` (relative to the
//! first byte after the manifest) and `nbytes`. Tensor scalars are stored
//! row-major in the dtype recorded for that tensor. Layer order in the manifest
//! is the network order and is never re-sorted.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::archgraph::GraphDocument;

/// Magic bytes at the start of every container: "LMEC".
pub const MAGIC: [u8; 4] = [0x4C, 0x4D, 0x45, 0x43];

/// Format version written by [`write_container`]; readers reject anything else.
pub const VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 8;

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("empty container")]
    Empty,
    #[error("invalid container: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("not an LMEC file")]
    BadMagic,
    #[error("unsupported LMEC version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated: {0}")]
    Truncated(String),
    #[error("manifest inconsistency: {0}")]
    Manifest(String),
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        })
    }
}

/// Scalar payload of a tensor, kept in its stored precision.
///
/// Equality is bitwise so that a round trip can be checked exactly, including
/// signed zeros and NaN payloads.
#[derive(Debug, Clone)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::F32(_) => Dtype::F32,
            TensorData::F64(_) => Dtype::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Promote to f64 for analysis.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }

    fn read_le(dtype: Dtype, bytes: &[u8]) -> Self {
        match dtype {
            Dtype::F32 => TensorData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            Dtype::F64 => TensorData::F64(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        }
    }
}

impl PartialEq for TensorData {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (TensorData::F32(a), TensorData::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (TensorData::F64(a), TensorData::F64(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

/// A named trained-weight tensor of shape `p_1 x ... x p_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl WeightTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: TensorData) -> Self {
        Self {
            name: name.into(),
            shape,
            data,
        }
    }

    pub fn f32(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self::new(name, shape, TensorData::F32(data))
    }

    pub fn f64(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self::new(name, shape, TensorData::F64(data))
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    /// Product of the shape entries, or `None` on overflow.
    pub fn element_count(&self) -> Option<usize> {
        self.shape.iter().try_fold(1usize, |acc, &p| acc.checked_mul(p))
    }

    pub fn nbytes(&self) -> usize {
        self.data.len() * self.dtype().size()
    }

    fn diagnostics(&self, out: &mut Vec<Diagnostic>) {
        let layer = self.name.clone();
        if self.name.is_empty() {
            out.push(Diagnostic::EmptyName);
        }
        if self.shape.is_empty() {
            out.push(Diagnostic::NoDimensions { layer });
            return;
        }
        if self.shape.contains(&0) {
            out.push(Diagnostic::ZeroDimension { layer: layer.clone() });
        }
        match self.element_count() {
            Some(expected) if expected == self.data.len() => {}
            Some(expected) => out.push(Diagnostic::DataLength {
                layer,
                expected,
                actual: self.data.len(),
            }),
            None => out.push(Diagnostic::ShapeOverflow { layer }),
        }
    }
}

/// One violated container invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    EmptyContainer,
    UnsupportedVersion(u32),
    EmptyName,
    NoDimensions {
        layer: String,
    },
    ZeroDimension {
        layer: String,
    },
    ShapeOverflow {
        layer: String,
    },
    DataLength {
        layer: String,
        expected: usize,
        actual: usize,
    },
    DuplicateName(String),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::EmptyContainer => write!(f, "empty container"),
            Diagnostic::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            Diagnostic::EmptyName => write!(f, "layer with empty name"),
            Diagnostic::NoDimensions { layer } => write!(f, "layer '{layer}': shape has no dimensions"),
            Diagnostic::ZeroDimension { layer } => write!(f, "layer '{layer}': zero-sized dimension"),
            Diagnostic::ShapeOverflow { layer } => write!(f, "layer '{layer}': element count overflows"),
            Diagnostic::DataLength {
                layer,
                expected,
                actual,
            } => write!(
                f,
                "layer '{layer}': shape needs {expected} scalars but data holds {actual}"
            ),
            Diagnostic::DuplicateName(name) => write!(f, "duplicate layer name '{name}'"),
        }
    }
}

/// Ordered weight tensors plus an optional architecture graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub version: u32,
    pub layers: Vec<WeightTensor>,
    pub graph: Option<GraphDocument>,
}

impl Container {
    pub fn new(layers: Vec<WeightTensor>, graph: Option<GraphDocument>) -> Self {
        Self {
            version: VERSION,
            layers,
            graph,
        }
    }

    pub fn layer(&self, name: &str) -> Option<&WeightTensor> {
        self.layers.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ContainerError> {
        if self.version != VERSION {
            return Err(ContainerError::UnsupportedVersion(self.version));
        }
        write_container(&self.layers, self.graph.as_ref())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ContainerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        read_container(&bytes)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|source| ContainerError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// The manifest this container serializes to.
    pub fn manifest(&self) -> Manifest {
        let mut offset = 0u64;
        let layers = self
            .layers
            .iter()
            .map(|t| {
                let nbytes = t.nbytes() as u64;
                let entry = ManifestEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    dtype: t.dtype(),
                    offset,
                    nbytes,
                };
                offset += nbytes;
                entry
            })
            .collect();
        Manifest {
            layers,
            graph: self.graph.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub offset: u64,
    pub nbytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layers: Vec<ManifestEntry>,
    pub graph: Option<GraphDocument>,
}

/// Check every container invariant; empty iff the container is well formed.
pub fn validate_container(c: &Container) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if c.version != VERSION {
        out.push(Diagnostic::UnsupportedVersion(c.version));
    }
    if c.layers.is_empty() {
        out.push(Diagnostic::EmptyContainer);
    }
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for t in &c.layers {
        t.diagnostics(&mut out);
        if !seen.insert(t.name.as_str()) && reported.insert(t.name.as_str()) {
            out.push(Diagnostic::DuplicateName(t.name.clone()));
        }
    }
    out
}

/// Serialize `layers` (in order) and an optional graph into LMEC v1 bytes.
pub fn write_container(layers: &[WeightTensor], graph: Option<&GraphDocument>) -> Result<Vec<u8>, ContainerError> {
    if layers.is_empty() {
        return Err(ContainerError::Empty);
    }
    let container = Container::new(layers.to_vec(), graph.cloned());
    let diags = validate_container(&container);
    if !diags.is_empty() {
        return Err(ContainerError::Invalid(diags));
    }

    let manifest = serde_json::to_vec(&container.manifest()).map_err(|e| ContainerError::Manifest(e.to_string()))?;
    let data_len: usize = layers.iter().map(WeightTensor::nbytes).sum();

    let mut out = Vec::with_capacity(HEADER_LEN + manifest.len() + data_len);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for t in layers {
        t.data.write_le(&mut out);
    }
    Ok(out)
}

/// Parse only the header and manifest.
pub fn read_manifest(bytes: &[u8]) -> Result<(Manifest, usize), ContainerError> {
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ContainerError::Truncated(format!(
            "header needs {HEADER_LEN} bytes, stream holds {}",
            bytes.len()
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let available = (bytes.len() - HEADER_LEN) as u64;
    if manifest_len > available {
        return Err(ContainerError::Truncated(format!(
            "manifest declares {manifest_len} bytes, stream holds {available}"
        )));
    }
    let data_start = HEADER_LEN + manifest_len as usize;
    let manifest: Manifest =
        serde_json::from_slice(&bytes[HEADER_LEN..data_start]).map_err(|e| ContainerError::Manifest(e.to_string()))?;
    Ok((manifest, data_start))
}

/// Parse and validate LMEC v1 bytes. Nothing is returned unless the whole
/// stream is consistent.
pub fn read_container(bytes: &[u8]) -> Result<Container, ContainerError> {
    let (manifest, data_start) = read_manifest(bytes)?;
    let data = &bytes[data_start..];

    let mut ranges = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let count = entry
            .shape
            .iter()
            .try_fold(1u64, |acc, &p| acc.checked_mul(p as u64))
            .ok_or_else(|| ContainerError::Manifest(format!("layer '{}': element count overflows", entry.name)))?;
        let expected = count
            .checked_mul(entry.dtype.size() as u64)
            .ok_or_else(|| ContainerError::Manifest(format!("layer '{}': byte count overflows", entry.name)))?;
        if expected != entry.nbytes {
            return Err(ContainerError::Manifest(format!(
                "layer '{}': shape {:?} as {} needs {expected} bytes, manifest says {}",
                entry.name, entry.shape, entry.dtype, entry.nbytes
            )));
        }
        let end = entry
            .offset
            .checked_add(entry.nbytes)
            .ok_or_else(|| ContainerError::Manifest(format!("layer '{}': offset overflows", entry.name)))?;
        if end > data.len() as u64 {
            return Err(ContainerError::Truncated(format!(
                "layer '{}' needs data bytes {}..{end}, data region holds {}",
                entry.name,
                entry.offset,
                data.len()
            )));
        }
        ranges.push((entry.offset, end, entry.name.as_str()));
    }

    let mut sorted = ranges.clone();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(ContainerError::Manifest(format!(
                "layers '{}' and '{}' overlap in the data region",
                pair[0].2, pair[1].2
            )));
        }
    }

    let layers = manifest
        .layers
        .iter()
        .zip(&ranges)
        .map(|(entry, &(start, end, _))| {
            WeightTensor::new(
                entry.name.clone(),
                entry.shape.clone(),
                TensorData::read_le(entry.dtype, &data[start as usize..end as usize]),
            )
        })
        .collect();

    let container = Container::new(layers, manifest.graph);
    let diags = validate_container(&container);
    if !diags.is_empty() {
        return Err(ContainerError::Invalid(diags));
    }
    Ok(container)
}
