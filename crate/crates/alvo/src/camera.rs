//! Pinhole camera model and pixel coordinates.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("point has non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Continuous pixel coordinates, origin at the top-left pixel center,
/// x growing right and y growing down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub fn new(x: f64, y: f64) -> Self {
        PixelPoint { x, y }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Pinhole intrinsics plus the stream parameters tied to the sensor.
///
/// The default is a quarter-scale 212x200 sensor; the full 848x800 of a
/// fisheye tracking camera stays representable through the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// High-rate stream frame rate, frames per second.
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Radiometric scale applied between scene irradiance and pixel values.
    #[serde(default = "default_gain")]
    pub exposure_gain: f64,
}

fn default_fps() -> f64 {
    30.0
}

fn default_gain() -> f64 {
    1.0
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            width: 212,
            height: 200,
            fx: 150.0,
            fy: 150.0,
            cx: 106.0,
            cy: 100.0,
            fps: 30.0,
            exposure_gain: 1.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), CameraError> {
        if self.width < 16 || self.height < 16 {
            return Err(CameraError::InvalidIntrinsics(format!(
                "sensor too small: {}x{}",
                self.width, self.height
            )));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CameraError::InvalidIntrinsics(
                "focal length must be positive".into(),
            ));
        }
        if self.cx < 0.0
            || self.cx >= self.width as f64
            || self.cy < 0.0
            || self.cy >= self.height as f64
        {
            return Err(CameraError::InvalidIntrinsics(
                "principal point outside sensor".into(),
            ));
        }
        if self.fps <= 0.0 {
            return Err(CameraError::InvalidIntrinsics(
                "fps must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, p: &PixelPoint) -> bool {
        p.x >= 0.0 && p.x < self.width as f64 && p.y >= 0.0 && p.y < self.height as f64
    }

    /// Project a camera-frame point (x right, y down, z forward, meters)
    /// onto the image plane. Fails for points at or behind the camera.
    pub fn project(&self, point: &Vector3<f64>) -> Result<PixelPoint, CameraError> {
        if point.z <= 0.0 {
            return Err(CameraError::NonPositiveDepth(point.z));
        }
        Ok(PixelPoint {
            x: self.fx * point.x / point.z + self.cx,
            y: self.fy * point.y / point.z + self.cy,
        })
    }

    /// Invert the projection given the camera-frame depth (z coordinate).
    pub fn unproject(&self, pixel: &PixelPoint, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx * depth,
            (pixel.y - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Unit direction of the ray through a pixel, in the camera frame.
    pub fn ray_direction(&self, pixel: &PixelPoint) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
        .normalize()
    }
}
