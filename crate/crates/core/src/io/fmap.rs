//! FMAP dense feature-map format: 20-byte header (magic "FMAP", u32 height,
//! u32 width, u32 dim, f32 scale), then height×width×dim f32 values
//! row-major. Little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_bytes, write_bytes, ByteReader};
use crate::projection::FeatureMap;

const MAGIC: &[u8; 4] = b"FMAP";

pub fn write_fmap(path: impl AsRef<Path>, f: &FeatureMap) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(20 + f.data().len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&f.height().to_le_bytes());
    buf.extend_from_slice(&f.width().to_le_bytes());
    buf.extend_from_slice(&f.dim().to_le_bytes());
    buf.extend_from_slice(&f.scale().to_le_bytes());
    for &v in f.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &buf)
}

pub fn read_fmap(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = ByteReader::new(path, &bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::format(path, format!("bad magic {magic:02x?}")));
    }
    let height = r.u32()?;
    let width = r.u32()?;
    let dim = r.u32()?;
    let scale = r.f32()?;
    let cells = height as u64 * width as u64 * dim as u64;
    if r.remaining() as u64 != cells * 4 {
        return Err(Error::format(
            path,
            format!(
                "expected {} data bytes for {height}×{width}×{dim}, found {}",
                cells * 4,
                r.remaining()
            ),
        ));
    }
    let mut data = Vec::with_capacity(cells as usize);
    for _ in 0..cells {
        data.push(r.f32()?);
    }
    FeatureMap::new(height, width, dim, scale, data)
        .map_err(|e| Error::format(path, e.to_string()))
}
