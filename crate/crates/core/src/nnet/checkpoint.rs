//! Little-endian model checkpoint:
//!
//! ```text
//! "BTCK" | u16 version | u8 mode
//! u32 in_c, in_h, in_w, low_width, mid_width, feature_dim, disc_hidden, classes, disc_outputs
//! u32 block_count
//! per block: u16 name_len | name (utf-8) | u8 ndim | u32 dims[ndim] | u64 offset
//! payload: f64 values, blocks concatenated; `offset` counts values
//! ```

use std::fs;
use std::path::Path;

use super::params::{Arch, ModelBundle, ParamBlock};
use crate::datagen::Mode;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"BTCK";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint(m: &ModelBundle) -> Vec<u8> {
    let a = &m.arch;
    let mut buf = Vec::new();
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(a.mode.tag());
    for v in [
        a.in_c,
        a.in_h,
        a.in_w,
        a.low_width,
        a.mid_width,
        a.feature_dim,
        a.disc_hidden,
        a.classes,
        a.disc_outputs,
    ] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(m.blocks.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for b in &m.blocks {
        buf.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(b.name.as_bytes());
        buf.push(b.shape.len() as u8);
        for &d in &b.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend_from_slice(&offset.to_le_bytes());
        offset += b.values.len() as u64;
    }
    for b in &m.blocks {
        for v in &b.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    origin: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::Truncated(self.origin.into()));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(bytes: &[u8], origin: &str) -> Result<ModelBundle> {
    let mut r = Reader { bytes, at: 0, origin };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(origin.into()));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::BadMagic(format!(
            "{origin}: unsupported checkpoint version {version}"
        )));
    }
    let mode = Mode::from_tag(r.u8()?).ok_or_else(|| Error::BadMagic(format!("{origin}: unknown mode")))?;
    let arch = Arch {
        mode,
        in_c: r.u32()?,
        in_h: r.u32()?,
        in_w: r.u32()?,
        low_width: r.u32()?,
        mid_width: r.u32()?,
        feature_dim: r.u32()?,
        disc_hidden: r.u32()?,
        classes: r.u32()?,
        disc_outputs: r.u32()?,
    };
    arch.validate()?;
    let layout = arch.block_layout();
    let count = r.u32()?;
    if count != layout.len() {
        return Err(Error::Shape(format!(
            "{origin}: {count} blocks, expected {}",
            layout.len()
        )));
    }
    let mut manifest = Vec::with_capacity(count);
    for (name, shape, _, _) in &layout {
        let name_len = r.u16()? as usize;
        let got_name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Shape(format!("{origin}: block name is not utf-8")))?
            .to_string();
        let ndim = r.u8()? as usize;
        let dims = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let offset = r.u64()? as usize;
        if got_name != *name || dims != *shape {
            return Err(Error::Shape(format!(
                "{origin}: block {got_name} {dims:?} does not match {name} {shape:?}"
            )));
        }
        manifest.push((got_name, dims, offset));
    }
    let payload = r.at;
    let mut blocks = Vec::with_capacity(count);
    for (name, shape, offset) in manifest {
        let len: usize = shape.iter().product();
        let start = payload + offset * 8;
        let end = start + len * 8;
        if end > bytes.len() {
            return Err(Error::Truncated(origin.into()));
        }
        let values = bytes[start..end]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        blocks.push(ParamBlock { name, shape, values });
    }
    Ok(ModelBundle { arch, blocks })
}

pub fn save_checkpoint(m: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(m)).map_err(|e| Error::io(path.display(), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display(), e))?;
    read_checkpoint(&bytes, &path.display().to_string())
}
