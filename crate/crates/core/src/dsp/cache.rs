//! Flat binary spectrogram cache: `b"PFMS"`, `u32` n_mels, `u32` n_frames,
//! then `n_mels * n_frames` little-endian `f32` values, mel-major.

use std::path::Path;

use super::MelSpectrogram;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"PFMS";

pub fn write_cache(path: impl AsRef<Path>, spec: &MelSpectrogram) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(12 + 4 * spec.data().len());
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&(spec.n_mels() as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.n_frames() as u32).to_le_bytes());
    for &v in spec.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<MelSpectrogram> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != CACHE_MAGIC {
        return Err(Error::Format(format!("{}: not a PFMS spectrogram", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (n_mels, n_frames) = (word(4), word(8));
    let body = &bytes[12..];
    if body.len() != 4 * n_mels * n_frames {
        return Err(Error::Format(format!(
            "{}: expected {} payload bytes, found {}",
            path.display(),
            4 * n_mels * n_frames,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    MelSpectrogram::new(n_mels, n_frames, data)
}
