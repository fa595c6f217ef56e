//! Binary checkpoint container.
//!
//! Layout: 8 magic bytes, a little-endian `u32` version, a little-endian
//! `u64` header length, a JSON header, then raw little-endian `f64` blocks.
//! The header carries the model config, a manifest of `(name, shape, offset)`
//! entries with byte offsets into the block region, and free-form extra data.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PCLUSTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything stored in one checkpoint file. `blocks` begins with the model
/// parameters; anything after them (optimizer moments, say) is auxiliary.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub aux: Vec<(String, Tensor)>,
    pub extra: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    manifest: Vec<ManifestEntry>,
    param_count: usize,
    #[serde(default)]
    extra: serde_json::Value,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: ModelParams) -> Self {
        Self {
            config,
            params,
            aux: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.params.check_against(&self.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let blocks: Vec<(&str, &Tensor)> = self
            .params
            .names
            .iter()
            .map(String::as_str)
            .zip(&self.params.tensors)
            .chain(self.aux.iter().map(|(n, t)| (n.as_str(), t)))
            .collect();
        let mut manifest = Vec::with_capacity(blocks.len());
        let mut offset = 0u64;
        for (name, t) in &blocks {
            manifest.push(ManifestEntry {
                name: name.to_string(),
                shape: t.shape.clone(),
                offset,
            });
            offset += 8 * t.len() as u64;
        }
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
            manifest,
            param_count: self.params.tensors.len(),
            extra: self.extra.clone(),
        })?;
        let mut out = Vec::with_capacity(20 + header.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &blocks {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        if bytes.len() < 20 {
            return Err(bad(format!("file is {} bytes, shorter than the fixed preamble", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic bytes)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("format version {version}, this build reads {CHECKPOINT_VERSION}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let header_end = 20u64
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len() as u64)
            .ok_or_else(|| bad("truncated header".into()))? as usize;
        let header: Header =
            serde_json::from_slice(&bytes[20..header_end]).map_err(|e| bad(format!("corrupt header: {e}")))?;
        let body = &bytes[header_end..];

        let mut expected_offset = 0u64;
        let mut blocks = Vec::with_capacity(header.manifest.len());
        for entry in &header.manifest {
            if entry.offset != expected_offset {
                return Err(bad(format!("block {} at offset {}, expected {expected_offset}", entry.name, entry.offset)));
            }
            let count: usize = entry.shape.iter().product();
            let end = entry.offset as usize + 8 * count;
            if end > body.len() {
                return Err(bad(format!("truncated data in block {}", entry.name)));
            }
            let data = body[entry.offset as usize..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blocks.push((entry.name.clone(), Tensor::new(entry.shape.clone(), data)?));
            expected_offset = end as u64;
        }
        if expected_offset != body.len() as u64 {
            return Err(bad(format!(
                "{} trailing bytes after the last block",
                body.len() as u64 - expected_offset
            )));
        }
        if header.param_count > blocks.len() {
            return Err(bad("manifest lists fewer blocks than parameters".into()));
        }
        header.config.validate().map_err(|e| bad(e.to_string()))?;
        let aux = blocks.split_off(header.param_count);
        let (names, tensors) = blocks.into_iter().unzip();
        let params = ModelParams { names, tensors };
        params.check_against(&header.config).map_err(|e| bad(e.to_string()))?;
        Ok(Self {
            config: header.config,
            params,
            aux,
            extra: header.extra,
        })
    }

    /// Writes to a sibling temporary file first so a crash never leaves a
    /// half-written checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

pub fn save_checkpoint(params: &ModelParams, config: &ModelConfig, path: &Path) -> Result<()> {
    Checkpoint::new(config.clone(), params.clone()).save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, ModelConfig)> {
    let ck = Checkpoint::load(path)?;
    Ok((ck.params, ck.config))
}

/// Loads and insists the stored architecture equals `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &ModelConfig) -> Result<ModelParams> {
    let (params, config) = load_checkpoint(path)?;
    if &config != expected {
        return Err(Error::Checkpoint(format!(
            "{}: stored model config differs from the requested one",
            path.display()
        )));
    }
    Ok(params)
}
