//! Binary little-endian PLY point clouds: float x/y/z vertices, optionally
//! followed by uchar red/green/blue (r/g/b accepted as aliases on read).

use std::path::Path;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io::{read_bytes, write_bytes, ByteReader};

pub fn write_ply(
    path: impl AsRef<Path>,
    cloud: &PointCloud,
    colors: Option<&[[u8; 3]]>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(c) = colors {
        if c.len() != cloud.len() {
            return Err(Error::DimMismatch { expected: cloud.len(), got: c.len() });
        }
    }
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");

    let stride = if colors.is_some() { 15 } else { 12 };
    let mut buf = Vec::with_capacity(header.len() + cloud.len() * stride);
    buf.extend_from_slice(header.as_bytes());
    for (i, p) in cloud.points.iter().enumerate() {
        for k in 0..3 {
            buf.extend_from_slice(&(p[k] as f32).to_le_bytes());
        }
        if let Some(c) = colors {
            buf.extend_from_slice(&c[i]);
        }
    }
    write_bytes(path, &buf)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<(PointCloud, Option<Vec<[u8; 3]>>)> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::format(path, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::format(path, "non-UTF-8 header"))?;
    let body = &bytes[end + marker.len()..];

    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::format(path, "missing ply magic"));
    }
    let mut count: Option<usize> = None;
    let mut props: Vec<(String, String)> = Vec::new();
    for line in lines {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                let rest: Vec<&str> = words.collect();
                if rest != ["binary_little_endian", "1.0"] {
                    return Err(Error::format(
                        path,
                        format!("unsupported format {}", rest.join(" ")),
                    ));
                }
            }
            Some("comment") => {}
            Some("element") => {
                let kind = words.next().unwrap_or_default();
                if kind != "vertex" || count.is_some() {
                    return Err(Error::format(path, format!("unsupported element {kind}")));
                }
                let n = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| Error::format(path, "bad vertex count"))?;
                count = Some(n);
            }
            Some("property") => {
                let ty = words.next().unwrap_or_default().to_string();
                let name = words.next().unwrap_or_default().to_string();
                props.push((ty, name));
            }
            Some(other) => {
                return Err(Error::format(path, format!("unsupported keyword {other}")));
            }
            None => {}
        }
    }
    let count = count.ok_or_else(|| Error::format(path, "missing vertex element"))?;
    let names: Vec<&str> = props.iter().map(|(_, n)| n.as_str()).collect();
    let has_color = match names.as_slice() {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "red", "green", "blue"] | ["x", "y", "z", "r", "g", "b"] => true,
        _ => {
            return Err(Error::format(path, format!("unsupported properties {names:?}")));
        }
    };
    for (i, (ty, _)) in props.iter().enumerate() {
        let want = if i < 3 { "float" } else { "uchar" };
        if ty != want {
            return Err(Error::format(path, format!("property {} must be {want}", names[i])));
        }
    }
    let stride = if has_color { 15 } else { 12 };
    if body.len() != count * stride {
        return Err(Error::format(
            path,
            format!("expected {} data bytes, found {}", count * stride, body.len()),
        ));
    }

    let mut r = ByteReader::new(path, body);
    let mut points = Vec::with_capacity(count);
    let mut colors = has_color.then(|| Vec::with_capacity(count));
    for _ in 0..count {
        let (x, y, z) = (r.f32()?, r.f32()?, r.f32()?);
        points.push(Vector3::new(x as f64, y as f64, z as f64));
        if let Some(colors) = colors.as_mut() {
            let rgb = r.take(3)?;
            colors.push([rgb[0], rgb[1], rgb[2]]);
        }
    }
    Ok((PointCloud::new(points), colors))
}
