//! Binary checkpoint: magic `GRSP1`, then little-endian
//! `u32 version`, `u32 len` + descriptor bytes, `u32 n_bins`, `u64 seed`,
//! `u32 tensor_count`, and per tensor `u32 ndim`, `u32` dims, `f32` samples.
//! Tensors follow layer order, weight before bias.

use std::fs;
use std::path::Path;

use super::net::{LayerParams, ModelParams};
use super::spec::ModelSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"GRSP1";
pub const VERSION: u32 = 1;

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let desc = params.spec().to_string();
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(desc.as_bytes());
    out.extend_from_slice(&(params.n_bins() as u32).to_le_bytes());
    out.extend_from_slice(&params.seed().to_le_bytes());
    out.extend_from_slice(&(2 * params.layers().len() as u32).to_le_bytes());
    for layer in params.layers() {
        for t in [&layer.weight, &layer.bias] {
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let ndim = self.u32()? as usize;
        if ndim > 8 {
            return Err(Error::Checkpoint(format!("tensor rank {ndim} is implausible")));
        }
        let shape = (0..ndim).map(|_| Ok(self.u32()? as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .ok_or_else(|| Error::Checkpoint("tensor size overflows".into()))?;
        let raw = self.take(count.checked_mul(4).ok_or_else(|| Error::Checkpoint("tensor size overflows".into()))?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Tensor { shape, data })
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("missing GRSP1 magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let desc = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("descriptor is not UTF-8".into()))?;
    let spec: ModelSpec = desc.parse().map_err(|e| Error::Checkpoint(format!("bad descriptor: {e}")))?;
    let n_bins = r.u32()? as usize;
    if n_bins != spec.n_bins() {
        return Err(Error::Checkpoint(format!(
            "header says {n_bins} bins, descriptor {}",
            spec.n_bins()
        )));
    }
    let seed = r.u64()?;
    let count = r.u32()? as usize;
    if count % 2 != 0 {
        return Err(Error::Checkpoint("tensor count must pair weights with biases".into()));
    }
    let mut layers = Vec::with_capacity(count / 2);
    for _ in 0..count / 2 {
        let weight = r.tensor()?;
        let bias = r.tensor()?;
        layers.push(LayerParams { weight, bias });
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    ModelParams::from_parts(spec, layers, seed).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, to_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
