//! Little-endian dataset container:
//!
//! ```text
//! "BTDA" | u16 version | u8 mode | u32 n, c, h, w, k, K+1
//! n·c·h·w f32 values | n u16 class labels | n u16 domain ids
//! ```

use std::fs;
use std::path::Path;

use super::{Dataset, Mode};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"BTDA";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 6 * 4;

pub fn write_dataset(ds: &Dataset) -> Vec<u8> {
    let n = ds.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + ds.data.len() * 4 + n * 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(ds.mode.tag());
    for v in [n, ds.c, ds.h, ds.w, ds.k, ds.num_domains] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in &ds.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &ds.labels {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &ds.domain_ids {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn read_dataset(bytes: &[u8], origin: &str) -> Result<Dataset> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::Truncated(origin.into()));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic(origin.into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(origin.into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::BadMagic(format!("{origin}: unsupported version {version}")));
    }
    let mode =
        Mode::from_tag(bytes[6]).ok_or_else(|| Error::BadMagic(format!("{origin}: unknown mode tag {}", bytes[6])))?;
    let mut dims = [0usize; 6];
    for (i, d) in dims.iter_mut().enumerate() {
        let at = 7 + 4 * i;
        *d = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    }
    let [n, c, h, w, k, num_domains] = dims;

    let values = n
        .checked_mul(c)
        .and_then(|v| v.checked_mul(h))
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Truncated(origin.into()))?;
    let payload = values * 4 + n * 4;
    if bytes.len() - HEADER_LEN < payload {
        return Err(Error::Truncated(origin.into()));
    }

    let mut at = HEADER_LEN;
    let data = bytes[at..at + values * 4]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    at += values * 4;
    let labels = bytes[at..at + 2 * n]
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    at += 2 * n;
    let domain_ids = bytes[at..at + 2 * n]
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();

    let ds = Dataset {
        mode,
        c,
        h,
        w,
        k,
        num_domains,
        data,
        labels,
        domain_ids,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_dataset(ds)).map_err(|e| Error::io(path.display(), e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display(), e))?;
    read_dataset(&bytes, &path.display().to_string())
}
