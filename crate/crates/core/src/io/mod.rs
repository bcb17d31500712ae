//! On-disk artifact formats: DPC1 descriptor clouds, FMAP feature maps,
//! binary PLY point clouds, JSON sidecars, CSV reports, and the scene-bundle
//! directory layout.

pub mod bundle;
pub mod csv;
pub mod dpc;
pub mod fmap;
pub mod jsons;
pub mod ply;

pub use bundle::{read_bundle, write_bundle};
pub use csv::{write_curve_csv, write_report_csv};
pub use dpc::{read_dpc, write_dpc};
pub use fmap::{read_fmap, write_fmap};
pub use jsons::{
    read_calibration, read_json, write_json, CameraJson, ManifestJson, MetaJson, PlacementJson,
    PoseJson, ResultJson,
};
pub use ply::{read_ply, write_ply};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Little-endian cursor over a byte buffer with format-error context.
pub(crate) struct ByteReader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(path: &'a Path, buf: &'a [u8]) -> Self {
        Self { path, buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                format!("unexpected end of file at byte {}", self.buf.len()),
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}
