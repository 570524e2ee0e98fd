//! Grayscale portable float maps (`Pf`).
//!
//! Layout: the header `Pf\n<width> <height>\n<scale>\n` followed by rows of
//! 32-bit floats, bottom row first.  A negative scale marks little-endian
//! data; files are written with scale `-1.0`.  Non-finite values (missing
//! pixels) round-trip as infinities.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid2;

/// Write `values` as a little-endian `Pf` file.
pub fn write_pfm(path: &Path, values: &Grid2<f64>) -> Result<()> {
    let (h, w) = values.shape();
    if h == 0 || w == 0 {
        return Err(Error::invalid("refusing to write an empty float map"));
    }
    let mut bytes = Vec::with_capacity(32 + 4 * h * w);
    bytes.extend_from_slice(format!("Pf\n{w} {h}\n-1.0\n").as_bytes());
    for row in (0..h).rev() {
        for col in 0..w {
            bytes.extend_from_slice(&(values.get(row, col) as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Read a grayscale `Pf` file (either endianness, honoring `|scale|`).
pub fn read_pfm(path: &Path) -> Result<Grid2<f64>> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let mut token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse("truncated float-map header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(&bytes)?;
    if magic != "Pf" {
        return Err(Error::parse(format!(
            "expected a grayscale float map (magic `Pf`), found `{magic}`"
        )));
    }
    let w: usize = token(&bytes)?
        .parse()
        .map_err(|_| Error::parse("bad float-map width"))?;
    let h: usize = token(&bytes)?
        .parse()
        .map_err(|_| Error::parse("bad float-map height"))?;
    let scale: f64 = token(&bytes)?
        .parse()
        .map_err(|_| Error::parse("bad float-map scale"))?;
    if w == 0 || h == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(Error::parse("degenerate float-map header"));
    }
    // Exactly one whitespace byte separates the header from the data.
    pos += 1;

    let need = 4 * w * h;
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::parse("float map ends before its pixel data"))?;
    let little_endian = scale < 0.0;
    let factor = scale.abs();

    let mut out = Grid2::filled(h, w, 0.0);
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let raw = <[u8; 4]>::try_from(chunk).expect("chunks_exact yields 4 bytes");
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        // Bottom row comes first in the file.
        let row = h - 1 - i / w;
        let col = i % w;
        out.set(row, col, f64::from(v) * factor);
    }
    Ok(out)
}
