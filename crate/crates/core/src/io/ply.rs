//! ASCII PLY export for point clouds.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::evalbench::cloud::PointCloud;

/// Write a cloud as ASCII PLY with per-point confidence and source view id.
pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut text = String::with_capacity(128 + 48 * cloud.points.len());
    text.push_str("ply\nformat ascii 1.0\n");
    text.push_str(&format!("element vertex {}\n", cloud.points.len()));
    text.push_str(
        "property float x\nproperty float y\nproperty float z\n\
         property float confidence\nproperty uint view_id\nend_header\n",
    );
    for p in &cloud.points {
        text.push_str(&format!(
            "{} {} {} {} {}\n",
            p.position.x as f32,
            p.position.y as f32,
            p.position.z as f32,
            p.confidence as f32,
            p.view_id,
        ));
    }
    fs::write(path, text)?;
    Ok(())
}
