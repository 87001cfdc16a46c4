//! Self-describing parameter file.
//!
//! Layout: the 5-byte magic `CSPC1`, then one record per parameter until end
//! of file. A record is the name length (u64), the UTF-8 name bytes, the rank
//! (u64), each extent (u64), and the raw values (f64). All integers and floats
//! are little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Params, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"CSPC1";

pub fn write_checkpoint(params: &Params, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    for (name, t) in params.iter() {
        out.write_all(&(name.len() as u64).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.rank() as u64).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> Option<&'a [u8]> {
    let end = pos.checked_add(n)?;
    let s = buf.get(*pos..end)?;
    *pos = end;
    Some(s)
}

fn take_u64(buf: &[u8], pos: &mut usize) -> Option<u64> {
    take(buf, pos, 8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
}

/// Parses checkpoint bytes; `origin` is only used in error messages.
pub fn read_checkpoint(bytes: &[u8], origin: &Path) -> Result<Params> {
    let bad = |reason: &str| Error::Format {
        path: origin.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 5 || &bytes[..5] != CHECKPOINT_MAGIC {
        return Err(bad("missing CSPC1 magic"));
    }
    let mut pos = 5;
    let mut params = Params::new();
    while pos < bytes.len() {
        let name_len = take_u64(bytes, &mut pos).ok_or_else(|| bad("truncated name length"))?;
        let name = take(bytes, &mut pos, name_len as usize).ok_or_else(|| bad("truncated name"))?;
        let name = std::str::from_utf8(name).map_err(|_| bad("name is not UTF-8"))?;
        let rank = take_u64(bytes, &mut pos).ok_or_else(|| bad("truncated rank"))?;
        if rank > 8 {
            return Err(bad(&format!("implausible rank {rank} for `{name}`")));
        }
        let shape = (0..rank)
            .map(|_| take_u64(bytes, &mut pos).map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("truncated extents"))?;
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| bad("extent overflow"))?;
        let raw = take(bytes, &mut pos, numel.checked_mul(8).ok_or_else(|| bad("size overflow"))?)
            .ok_or_else(|| bad(&format!("truncated data for `{name}`")))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(shape, data).map_err(|e| bad(&e.to_string()))?;
        params.insert(name, t);
    }
    Ok(params)
}

/// Writes atomically: a sibling temp file is renamed over `path`.
pub fn save_checkpoint(params: &Params, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(params.numel() * 8 + 64 * params.len());
    write_checkpoint(params, &mut bytes).expect("writing to memory");
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Params> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::State(format!("checkpoint {} does not exist", path.display()))
            }
            _ => Error::io(path, e),
        })?;
    read_checkpoint(&bytes, path)
}
