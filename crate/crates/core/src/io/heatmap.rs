//! Grayscale PNG renderings of scalar fields for quick visual checks.

use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::grid::Grid2;

/// Render `values` to an 8-bit grayscale PNG, mapping `[0, max]` to
/// `[0, 255]`.  Non-finite entries (missing pixels) render black.
pub fn write_heatmap_png(path: &Path, values: &Grid2<f64>, max: f64) -> Result<()> {
    if !(max.is_finite() && max > 0.0) {
        return Err(Error::invalid("heat-map maximum must be positive"));
    }
    let (h, w) = values.shape();
    let mut img = ImageBuffer::<Luma<u8>, Vec<u8>>::new(w as u32, h as u32);
    for ((row, col), v) in values.enumerate() {
        let level = if v.is_finite() {
            (255.0 * (v / max).clamp(0.0, 1.0)).round() as u8
        } else {
            0
        };
        img.put_pixel(col as u32, row as u32, Luma([level]));
    }
    img.save(path)
        .map_err(|e| Error::parse(format!("PNG encoding failed: {e}")))
}
