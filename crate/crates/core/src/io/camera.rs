//! Pinhole calibration as JSON: intrinsics, a row-major world-to-camera
//! rotation, a translation, and the image size.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::CameraModel;

use super::json::{read_json, write_json};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CameraJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// World-to-camera rotation, row-major.
    rotation: [f64; 9],
    translation: [f64; 3],
    width: usize,
    height: usize,
}

/// Write a camera as JSON.
pub fn write_camera_json(path: &Path, cam: &CameraModel) -> Result<()> {
    let r = &cam.rotation;
    let json = CameraJson {
        fx: cam.fx,
        fy: cam.fy,
        cx: cam.cx,
        cy: cam.cy,
        rotation: [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
        ],
        translation: [cam.translation.x, cam.translation.y, cam.translation.z],
        width: cam.width,
        height: cam.height,
    };
    write_json(path, &json)
}

/// Read a camera from JSON, validating the rotation.
pub fn read_camera_json(path: &Path) -> Result<CameraModel> {
    let j: CameraJson = read_json(path)?;
    let m = j.rotation;
    CameraModel::new(
        j.fx,
        j.fy,
        j.cx,
        j.cy,
        Matrix3::new(m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8]),
        Vector3::new(j.translation[0], j.translation[1], j.translation[2]),
        j.width,
        j.height,
    )
}
