//! Parameter checkpoints: `b"PFCK"`, `u8` architecture tag, `u32` n_mels,
//! `u32` n_frames, `u32` tensor count, then per tensor `u32` rank and `u32`
//! dims, followed by every tensor's values as little-endian `f64`.

use std::path::Path;

use super::{init_params, Architecture, RegressorConfig, RegressorParams, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PFCK";

pub fn write_checkpoint(path: impl AsRef<Path>, params: &RegressorParams) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.push(params.architecture.tag());
    buf.extend_from_slice(&(params.input_shape.0 as u32).to_le_bytes());
    buf.extend_from_slice(&(params.input_shape.1 as u32).to_le_bytes());
    buf.extend_from_slice(&(params.tensors.len() as u32).to_le_bytes());
    for t in &params.tensors {
        buf.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for t in &params.tensors {
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<RegressorParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{}: not a PFCK checkpoint", path.display())));
    }
    let tag = c.take(1)?[0];
    let architecture = Architecture::from_tag(tag)
        .ok_or_else(|| Error::Format(format!("unknown architecture tag {tag}")))?;
    let input_shape = (c.u32()?, c.u32()?);
    let n = c.u32()?;
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = c.u32()?;
        shapes.push((0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?);
    }
    let mut tensors = Vec::with_capacity(n);
    for shape in shapes {
        let len: usize = shape.iter().product();
        let data = c
            .take(8 * len)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push(Tensor { shape, data });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    Ok(RegressorParams {
        architecture,
        input_shape,
        tensors,
    })
}

/// Reads a checkpoint and rejects it unless its layout matches what `cfg`
/// would build for `input_shape`.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
    cfg: &RegressorConfig,
    input_shape: (usize, usize),
) -> Result<RegressorParams> {
    let params = read_checkpoint(path)?;
    let template = init_params(cfg, input_shape)?;
    if params.architecture != template.architecture
        || params.input_shape != template.input_shape
        || params.shapes() != template.shapes()
    {
        return Err(Error::Shape(format!(
            "checkpoint layout {:?}{:?} does not match configured {:?}{:?}",
            params.architecture,
            params.shapes(),
            template.architecture,
            template.shapes()
        )));
    }
    Ok(params)
}
