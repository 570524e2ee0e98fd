//! Quantized 16-bit PNG depth maps with a JSON scale sidecar, and 8-bit
//! PNG masks.
//!
//! Depth is stored as `round(depth / scale)` clamped to `1..=65535`;
//! raw value `0` marks a missing pixel.  The scale lives in a sidecar JSON
//! file next to the image (same stem, `.json` extension).

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{is_valid_depth, SENTINEL_DEPTH};
use crate::grid::Grid2;

use super::json::{read_json, write_json};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct DepthScale {
    scale: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Write a depth map as 16-bit grayscale PNG plus its scale sidecar.
///
/// Returns the scale chosen so the largest valid depth maps to 65535.
pub fn write_depth_png16(path: &Path, depth: &Grid2<f64>) -> Result<f64> {
    let (h, w) = depth.shape();
    let max_valid = depth
        .iter()
        .copied()
        .filter(|&d| is_valid_depth(d))
        .fold(0.0_f64, f64::max);
    let scale = if max_valid > 0.0 { max_valid / 65535.0 } else { 1.0 };

    let mut img = ImageBuffer::<Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    for ((row, col), d) in depth.enumerate() {
        let q = if is_valid_depth(d) {
            (d / scale).round().clamp(1.0, 65535.0) as u16
        } else {
            0
        };
        img.put_pixel(col as u32, row as u32, Luma([q]));
    }
    img.save(path)
        .map_err(|e| Error::parse(format!("PNG encoding failed: {e}")))?;
    write_json(&sidecar_path(path), &DepthScale { scale })?;
    Ok(scale)
}

/// Read a 16-bit PNG depth map and its scale sidecar; raw `0` becomes the
/// missing-pixel sentinel.
pub fn read_depth_png16(path: &Path) -> Result<Grid2<f64>> {
    let img = image::open(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?
        .into_luma16();
    let DepthScale { scale } = read_json(&sidecar_path(path))?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::parse("depth scale sidecar must hold a positive scale"));
    }
    let (w, h) = img.dimensions();
    let mut out = Grid2::filled(h as usize, w as usize, SENTINEL_DEPTH);
    for (x, y, Luma([q])) in img.enumerate_pixels() {
        if *q > 0 {
            out.set(y as usize, x as usize, f64::from(*q) * scale);
        }
    }
    Ok(out)
}

/// Write a boolean mask as an 8-bit PNG (255 for true).
pub fn write_mask_png(path: &Path, mask: &Grid2<bool>) -> Result<()> {
    let (h, w) = mask.shape();
    let mut img = ImageBuffer::<Luma<u8>, Vec<u8>>::new(w as u32, h as u32);
    for ((row, col), m) in mask.enumerate() {
        img.put_pixel(col as u32, row as u32, Luma([if m { 255 } else { 0 }]));
    }
    img.save(path)
        .map_err(|e| Error::parse(format!("PNG encoding failed: {e}")))
}

/// Read an 8-bit PNG as a boolean mask (any value above 127 is true).
pub fn read_mask_png(path: &Path) -> Result<Grid2<bool>> {
    let img = image::open(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let mut out = Grid2::filled(h as usize, w as usize, false);
    for (x, y, Luma([v])) in img.enumerate_pixels() {
        out.set(y as usize, x as usize, *v > 127);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn depth_round_trip_stays_within_quantization() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.png");
        let mut depth = Grid2::filled(4, 3, 0.0);
        for ((r, c), _) in depth.clone().enumerate() {
            depth.set(r, c, 5.0 + (r * 3 + c) as f64);
        }
        depth.set(2, 1, SENTINEL_DEPTH);
        let scale = write_depth_png16(&path, &depth).unwrap();
        let back = read_depth_png16(&path).unwrap();
        for ((r, c), d) in depth.enumerate() {
            let b = back.get(r, c);
            if is_valid_depth(d) {
                assert!((b - d).abs() <= 0.5 * scale + 1e-12, "({r}, {c}): {b} vs {d}");
            } else {
                assert!(!is_valid_depth(b));
            }
        }
        assert!(path.with_extension("json").exists(), "sidecar must exist");
    }

    #[test]
    fn mask_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mut mask = Grid2::filled(3, 5, false);
        mask.set(0, 0, true);
        mask.set(2, 4, true);
        write_mask_png(&path, &mask).unwrap();
        assert_eq!(read_mask_png(&path).unwrap(), mask);
    }

    #[test]
    fn all_missing_map_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.png");
        let depth = Grid2::filled(2, 2, SENTINEL_DEPTH);
        write_depth_png16(&path, &depth).unwrap();
        let back = read_depth_png16(&path).unwrap();
        assert!(back.iter().all(|d| !is_valid_depth(*d)));
    }
}
