//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "SKBCKPT1"
//! version    u32      = 1
//! cfg_len    u32      length of the config JSON
//! cfg        bytes    ScoreNetConfig as UTF-8 JSON
//! count      u32      number of tensors
//! per tensor:
//!   name_len u32, name bytes (UTF-8)
//!   ndim     u32      = 2
//!   dims     u64 × ndim
//!   data     f64 × prod(dims), row-major
//! ```
//!
//! Tensors appear in registry order; loading rejects any mismatch in names,
//! shapes or count.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{ScoreNetConfig, ScoreNetParams};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SKBCKPT1";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(params: &ScoreNetParams, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(params.config())?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(&cfg)?;
    w.write_all(&(params.tensors().len() as u32).to_le_bytes())?;
    for (name, t) in params.names().iter().zip(params.tensors()) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&2u32.to_le_bytes())?;
        w.write_all(&(t.nrows() as u64).to_le_bytes())?;
        w.write_all(&(t.ncols() as u64).to_le_bytes())?;
        for v in t.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_bytes<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    r.take(len as u64).read_to_end(&mut b)?;
    if b.len() != len {
        return Err(Error::Checkpoint("truncated checkpoint".into()));
    }
    Ok(b)
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated checkpoint".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ScoreNetParams> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let cfg_len = read_u32(&mut r)? as usize;
    let cfg: ScoreNetConfig = serde_json::from_slice(&read_bytes(&mut r, cfg_len)?)
        .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
    cfg.validate()?;
    let count = read_u32(&mut r)? as usize;
    let expected = super::registry(&cfg);
    if count != expected.len() {
        return Err(Error::Checkpoint(format!("expected {} tensors, found {count}", expected.len())));
    }
    let mut named = Vec::with_capacity(count);
    for (exp_name, exp_shape) in &expected {
        let name_len = read_u32(&mut r)? as usize;
        if name_len > 4096 {
            return Err(Error::Checkpoint("tensor name too long".into()));
        }
        let name = String::from_utf8(read_bytes(&mut r, name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let ndim = read_u32(&mut r)?;
        if ndim != 2 {
            return Err(Error::Checkpoint(format!("tensor '{name}' has {ndim} dimensions")));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        if &name != exp_name || [rows, cols] != *exp_shape {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' {rows}×{cols} does not match registry entry '{exp_name}' {}×{}",
                exp_shape[0], exp_shape[1]
            )));
        }
        let raw = read_bytes(&mut r, rows * cols * 8)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        named.push((name, Array2::from_shape_vec((rows, cols), data).expect("sized")));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    ScoreNetParams::from_tensors(&cfg, named)
}

pub fn save(params: &ScoreNetParams, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(params, std::io::BufWriter::new(f))
}

pub fn load(path: &Path) -> Result<ScoreNetParams> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}
