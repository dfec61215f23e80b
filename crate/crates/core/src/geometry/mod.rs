//! Rigid-body math, pinhole cameras and image containers.
//!
//! World frame is right-handed with +z up. Rotations are unit quaternions;
//! matrices are derived on demand.

mod camera;
mod image;
mod quat;
mod transform;
mod vec3;

pub use camera::{
    project, project_camera_frame, unproject, unproject_camera_frame, Camera, CameraIntrinsics, CameraPose, Projection,
};
pub use image::{Frame, Mask, RgbdImage};
pub use quat::{UnitQuat, ZeroQuaternion};
pub use transform::{compose, rotate_about_point, RigidTransform};
pub use vec3::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("invalid depth {depth}")]
    InvalidDepth { depth: f64 },
    #[error("invalid intrinsics fx={fx} fy={fy} cx={cx} cy={cy} size={width}x{height}")]
    InvalidIntrinsics {
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    },
    #[error("buffer size mismatch: image is {expected:?}, buffers have {found:?} elements")]
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
}

/// Convert degrees to radians.
pub fn deg(d: f64) -> f64 {
    d.to_radians()
}
