//! Raw dumps of constraint volumes: a flat little-endian `f32` file plus a
//! JSON shape header (same stem, `.json` extension).
//!
//! The raw file concatenates the channels in header order; each channel is
//! row-major with the hypothesis axis innermost.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::vcv::ConstraintVolume;

use super::json::{read_json, write_json};

/// Shape header accompanying a raw volume dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub height: usize,
    pub width: usize,
    pub hypotheses: usize,
    pub channels: Vec<String>,
    /// Element encoding; always `f32le`.
    pub dtype: String,
}

fn push_channel(bytes: &mut Vec<u8>, grid: &Grid3<f64>) {
    for &v in grid.as_slice() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Write the three channels to `raw_path` and the header to its `.json`
/// sibling.
pub fn write_volume(raw_path: &Path, volume: &ConstraintVolume<f64>) -> Result<()> {
    let (h, w, m) = volume.support.shape();
    let header = VolumeHeader {
        height: h,
        width: w,
        hypotheses: m,
        channels: vec!["support".into(), "occlusion".into(), "freespace".into()],
        dtype: "f32le".into(),
    };
    let mut bytes = Vec::with_capacity(3 * h * w * m * 4);
    push_channel(&mut bytes, &volume.support);
    push_channel(&mut bytes, &volume.occlusion);
    push_channel(&mut bytes, &volume.freespace);
    fs::write(raw_path, bytes)?;
    write_json(&raw_path.with_extension("json"), &header)
}

/// Read a raw volume dump back as `(header, one grid per channel)`.
pub fn read_volume(raw_path: &Path) -> Result<(VolumeHeader, Vec<Grid3<f64>>)> {
    let header: VolumeHeader = read_json(&raw_path.with_extension("json"))?;
    if header.dtype != "f32le" {
        return Err(Error::parse(format!("unsupported volume dtype `{}`", header.dtype)));
    }
    let per_channel = header.height * header.width * header.hypotheses;
    let bytes = fs::read(raw_path)?;
    if bytes.len() != 4 * per_channel * header.channels.len() {
        return Err(Error::parse(format!(
            "volume file holds {} bytes, header implies {}",
            bytes.len(),
            4 * per_channel * header.channels.len()
        )));
    }
    let mut channels = Vec::with_capacity(header.channels.len());
    for c in 0..header.channels.len() {
        let mut grid = Grid3::filled(header.height, header.width, header.hypotheses, 0.0);
        let slice = grid.as_mut_slice();
        for (i, chunk) in bytes[4 * per_channel * c..4 * per_channel * (c + 1)]
            .chunks_exact(4)
            .enumerate()
        {
            slice[i] = f64::from(f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")));
        }
        channels.push(grid);
    }
    Ok((header, channels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2;
    use tempfile::tempdir;

    #[test]
    fn round_trips_all_three_channels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vol.raw");
        let mut volume = ConstraintVolume {
            support: Grid3::filled(2, 3, 4, 0.0),
            occlusion: Grid3::filled(2, 3, 4, 0.0),
            freespace: Grid3::filled(2, 3, 4, 0.0),
            valid_views: Grid2::filled(2, 3, 1),
            freespace_views: Grid3::filled(2, 3, 4, 1),
        };
        for i in 0..volume.support.len() {
            volume.support.as_mut_slice()[i] = i as f64 * 0.25;
            volume.occlusion.as_mut_slice()[i] = 1.0 - i as f64 * 0.015625;
            volume.freespace.as_mut_slice()[i] = (i % 7) as f64 * 0.125;
        }
        write_volume(&path, &volume).unwrap();
        let (header, channels) = read_volume(&path).unwrap();
        assert_eq!(header.hypotheses, 4);
        assert_eq!(header.channels, vec!["support", "occlusion", "freespace"]);
        assert_eq!(channels[0], volume.support);
        assert_eq!(channels[1], volume.occlusion);
        assert_eq!(channels[2], volume.freespace);
    }

    #[test]
    fn rejects_size_mismatch() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vol.raw");
        let volume = ConstraintVolume {
            support: Grid3::filled(1, 1, 2, 0.5),
            occlusion: Grid3::filled(1, 1, 2, 0.5),
            freespace: Grid3::filled(1, 1, 2, 0.5),
            valid_views: Grid2::filled(1, 1, 1),
            freespace_views: Grid3::filled(1, 1, 2, 1),
        };
        write_volume(&path, &volume).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(read_volume(&path).is_err());
    }
}
