//! DPC1 descriptor-cloud format: 16-byte header (magic "DPC1", u32 point
//! count, u32 descriptor dim, u32 reserved zero), then per-point x/y/z as
//! f32, then the dense f32 descriptor matrix row-major. Little-endian.

use std::path::Path;

use nalgebra::Vector3;

use crate::cloud::{DescriptorCloud, PointCloud};
use crate::error::{Error, Result};
use crate::io::{read_bytes, write_bytes, ByteReader};

const MAGIC: &[u8; 4] = b"DPC1";

pub fn write_dpc(path: impl AsRef<Path>, c: &DescriptorCloud) -> Result<()> {
    let path = path.as_ref();
    let mut buf =
        Vec::with_capacity(16 + c.len() * 12 + c.descriptors().len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(c.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(c.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for p in &c.cloud.points {
        for k in 0..3 {
            buf.extend_from_slice(&(p[k] as f32).to_le_bytes());
        }
    }
    for &v in c.descriptors() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &buf)
}

pub fn read_dpc(path: impl AsRef<Path>) -> Result<DescriptorCloud> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let mut r = ByteReader::new(path, &bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::format(path, format!("bad magic {magic:02x?}")));
    }
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    r.u32()?; // reserved
    let expected = 16u64 + count as u64 * 12 + count as u64 * dim as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes for {count}×{dim}, found {}", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let (x, y, z) = (r.f32()?, r.f32()?, r.f32()?);
        points.push(Vector3::new(x as f64, y as f64, z as f64));
    }
    let mut descriptors = Vec::with_capacity(count * dim);
    for _ in 0..count * dim {
        descriptors.push(r.f32()?);
    }
    DescriptorCloud::new(PointCloud::new(points), descriptors, dim)
}
