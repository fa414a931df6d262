//! Binary tensor archive, its checksum manifest, and model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes  "TLUNETAR"
//! version   u32      1
//! meta_len  u32      followed by meta_len bytes of UTF-8 `key = value` lines
//! count     u32      number of tensors, then per tensor:
//!   name_len u32, name (UTF-8)
//!   dtype    u8      1 = f32, 2 = f64
//!   ndim     u32, dims u64 * ndim
//!   values   dtype-sized little-endian floats, row-major
//! ```
//!
//! A manifest lists one tensor per line: `name<TAB>d0xd1x..<TAB>sha256` where the
//! digest covers the tensor's raw value bytes.

use std::path::Path;

use sha2::{Digest, Sha256};
use tlunet_core::data::NormStats;
use tlunet_core::model::{build_model, EncoderFamily, ModelConfig, NamedTensor, UNet};
use tlunet_core::Scalar;

use crate::config::{model_config_from_kv, model_config_to_kv};
use crate::error::{fs, Error, Result};
use crate::kv::{join_list, KvMap};

const MAGIC: &[u8; 8] = b"TLUNETAR";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32 = 1,
    F64 = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    /// Widened to f64 in memory; narrowed again on write for f32 tensors.
    pub values: Vec<f64>,
}

impl ArchiveTensor {
    fn raw_bytes(&self) -> Vec<u8> {
        match self.dtype {
            DType::F32 => self.values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect(),
            DType::F64 => self.values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.raw_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Archive {
    /// Free-form `key = value` metadata.
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<ArchiveTensor>,
}

fn dtype_of<T: Scalar>() -> DType {
    if std::mem::size_of::<T>() == 4 {
        DType::F32
    } else {
        DType::F64
    }
}

impl Archive {
    pub fn from_named<T: Scalar>(meta: &KvMap, tensors: &[NamedTensor<T>]) -> Self {
        Self {
            meta: meta.pairs().map(|(k, v)| (k.into(), v.into())).collect(),
            tensors: tensors
                .iter()
                .map(|t| ArchiveTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    dtype: dtype_of::<T>(),
                    values: t.values.iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_named<T: Scalar>(&self) -> Vec<NamedTensor<T>> {
        self.tensors
            .iter()
            .map(|t| NamedTensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                values: t.values.iter().map(|&v| T::from_f64(v)).collect(),
            })
            .collect()
    }

    pub fn meta_kv(&self) -> KvMap {
        KvMap::from_pairs(self.meta.iter().cloned())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let meta: String = self.meta.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dtype as u8);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&t.raw_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err("not a tensor archive (bad magic)".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported archive version {version}"));
        }
        let meta_len = r.u32()? as usize;
        let meta_text = std::str::from_utf8(r.take(meta_len)?).map_err(|_| "metadata is not UTF-8")?;
        let meta = KvMap::parse(meta_text, "archive metadata").map_err(|e| e.to_string())?;
        let meta_pairs = meta.pairs().map(|(k, v)| (k.into(), v.into())).collect();
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| "tensor name is not UTF-8")?.to_string();
            let dtype = match r.take(1)?[0] {
                1 => DType::F32,
                2 => DType::F64,
                d => return Err(format!("tensor `{name}`: unknown dtype {d}")),
            };
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
            let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("tensor size overflow")?;
            let width = if dtype == DType::F32 { 4 } else { 8 };
            let raw = r.take(numel.checked_mul(width).ok_or("tensor size overflow")?)?;
            let values = match dtype {
                DType::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
                DType::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            };
            tensors.push(ArchiveTensor { name, shape, dtype, values });
        }
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Self { meta: meta_pairs, tensors })
    }

    pub fn manifest(&self) -> String {
        self.tensors
            .iter()
            .map(|t| format!("{}\t{}\t{}\n", t.name, t.shape.iter().map(ToString::to_string).collect::<Vec<_>>().join("x"), t.sha256()))
            .collect()
    }

    /// Checks names, shapes and digests against manifest text.
    pub fn verify_manifest(&self, manifest: &str) -> std::result::Result<(), String> {
        let expected = self.manifest();
        let (mut a, mut b) = (expected.lines(), manifest.lines().filter(|l| !l.trim().is_empty()));
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ok(()),
                (Some(x), Some(y)) if x == y => {}
                (Some(x), Some(y)) => return Err(format!("manifest mismatch: archive has `{x}`, manifest has `{y}`")),
                (Some(x), None) => return Err(format!("manifest lacks `{x}`")),
                (None, Some(y)) => return Err(format!("archive lacks `{y}`")),
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        fs::write(&manifest_path(path), self.manifest())
    }

    /// Reads an archive and, when its manifest exists next to it, verifies it.
    pub fn load(path: &Path) -> Result<Self> {
        let archive = Self::from_bytes(&fs::read(path)?).map_err(|m| Error::format(path, m))?;
        let mp = manifest_path(path);
        if mp.exists() {
            archive.verify_manifest(&fs::read_to_string(&mp)?).map_err(|m| Error::format(&mp, m))?;
        }
        Ok(archive)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("archive is truncated")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// `model.tlar` → `model.manifest`.
pub fn manifest_path(archive: &Path) -> std::path::PathBuf {
    archive.with_extension("manifest")
}

/// Encoder weights with the family recorded in the metadata.
pub fn encoder_archive<T: Scalar>(model: &UNet<T>) -> Archive {
    let mut meta = KvMap::default();
    meta.insert("kind", "encoder");
    meta.insert("encoder_family", model.config().family());
    Archive::from_named(&meta, &model.encoder_state())
}

/// Reads an encoder archive and checks it was exported from `family`.
pub fn load_encoder_archive<T: Scalar>(path: &Path, family: EncoderFamily) -> Result<Vec<NamedTensor<T>>> {
    let archive = Archive::load(path)?;
    match archive.meta_value("encoder_family") {
        Some(f) if f == family.as_str() => Ok(archive.to_named()),
        Some(f) => Err(tlunet_core::Error::Load(format!(
            "{}: archive holds a {f} encoder, model is {family}",
            path.display()
        ))
        .into()),
        None => Err(Error::format(path, "archive metadata lacks encoder_family")),
    }
}

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &UNet<T>, norm: &NormStats) -> Result<()> {
    let mut meta = KvMap::default();
    meta.insert("kind", "checkpoint");
    meta.insert("encoder_family", model.config().family());
    model_config_to_kv(model.config(), &mut meta);
    meta.insert("norm.mean", join_list(&norm.mean));
    meta.insert("norm.std", join_list(&norm.std));
    Archive::from_named(&meta, &model.state()).save(path)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(UNet<T>, NormStats)> {
    let archive = Archive::load(path)?;
    if archive.meta_value("kind") != Some("checkpoint") {
        return Err(Error::format(path, "not a model checkpoint"));
    }
    let meta = archive.meta_kv();
    meta.raw("kind");
    meta.raw("encoder_family");
    let mut cfg: ModelConfig = model_config_from_kv(&meta)?;
    // Weights come from the checkpoint itself.
    cfg.init_mode = tlunet_core::model::InitMode::Random;
    cfg.pretrained_source = None;
    let three = |key: &str| -> Result<[f64; 3]> {
        meta.list::<f64>(key)?
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| Error::format(path, format!("checkpoint lacks 3-value `{key}`")))
    };
    let norm = NormStats { mean: three("norm.mean")?, std: three("norm.std")? };
    let mut model = build_model::<T>(&cfg)?;
    model.load_state(&archive.to_named())?;
    Ok((model, norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Archive {
        Archive {
            meta: vec![("kind".into(), "encoder".into())],
            tensors: vec![
                ArchiveTensor { name: "a.weight".into(), shape: vec![2, 3], dtype: DType::F32, values: vec![0.5, -1.0, 2.0, 3.0, 4.0, 5.25] },
                ArchiveTensor { name: "b".into(), shape: vec![1], dtype: DType::F64, values: vec![0.1] },
            ],
        }
    }

    #[test]
    fn bytes_roundtrip() {
        let a = sample();
        assert_eq!(Archive::from_bytes(&a.to_bytes()).unwrap(), a);
    }

    #[test]
    fn truncation_and_magic_are_detected() {
        let b = sample().to_bytes();
        assert!(Archive::from_bytes(&b[..b.len() - 1]).unwrap_err().contains("truncated"));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Archive::from_bytes(&bad).unwrap_err().contains("magic"));
    }

    #[test]
    fn manifest_detects_tampering() {
        let a = sample();
        let m = a.manifest();
        assert!(m.starts_with("a.weight\t2x3\t"));
        a.verify_manifest(&m).unwrap();
        let mut b = a.clone();
        b.tensors[1].values[0] = 0.2;
        assert!(b.verify_manifest(&m).is_err());
    }
}
