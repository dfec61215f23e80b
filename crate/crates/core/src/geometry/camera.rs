use serde::{Deserialize, Serialize};

use super::transform::RigidTransform;
use super::vec3::Vec3;
use super::GeomError;

/// Pinhole intrinsics. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`, so its
/// center sits at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRepr", into = "IntrinsicsRepr")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    w: usize,
    h: usize,
}

impl TryFrom<IntrinsicsRepr> for CameraIntrinsics {
    type Error = GeomError;
    fn try_from(r: IntrinsicsRepr) -> Result<Self, GeomError> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.w, r.h)
    }
}

impl From<CameraIntrinsics> for IntrinsicsRepr {
    fn from(c: CameraIntrinsics) -> Self {
        IntrinsicsRepr { fx: c.fx, fy: c.fy, cx: c.cx, cy: c.cy, w: c.width, h: c.height }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, GeomError> {
        let ok = fx > 0.0
            && fy > 0.0
            && width > 0
            && height > 0
            && cx > 0.0
            && cx < width as f64
            && cy > 0.0
            && cy < height as f64;
        if !ok {
            return Err(GeomError::InvalidIntrinsics { fx, fy, cx, cy, width, height });
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Result<Self, GeomError> {
        Self::new(focal, focal, width as f64 * 0.5, height as f64 * 0.5, width, height)
    }

    /// Same field of view at `factor`× the resolution.
    pub fn scaled(&self, factor: usize) -> Self {
        let f = factor as f64;
        Self {
            fx: self.fx * f,
            fy: self.fy * f,
            cx: self.cx * f,
            cy: self.cy * f,
            width: self.width * factor,
            height: self.height * factor,
        }
    }

    /// Same field of view, resampled to `width × height`.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self, GeomError> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Extrinsics. The camera frame is x right, y down, z forward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CameraPose {
    pub world_from_camera: RigidTransform,
}

impl CameraPose {
    pub fn new(world_from_camera: RigidTransform) -> Self {
        Self { world_from_camera }
    }

    /// Camera at `eye` looking at `target`, image "up" as close to `up` as possible.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Self {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(up);
        if right.norm() < 1e-9 {
            right = forward.any_orthogonal();
        }
        let right = right.normalize();
        let down = forward.cross(right);
        let rot = super::quat::UnitQuat::from_matrix(&super::vec3::Mat3::from_cols(right, down, forward));
        Self::new(RigidTransform::new(rot, eye))
    }

    pub fn camera_from_world(&self) -> RigidTransform {
        self.world_from_camera.inverse()
    }

    pub fn center(&self) -> Vec3 {
        self.world_from_camera.translation
    }

    /// The pose after moving the whole scene by `t`.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self::new(t.compose(&self.world_from_camera))
    }
}

/// A named, posed pinhole camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

/// Pixel coordinates and camera-frame depth of a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

pub fn project(point: Vec3, cam: &CameraIntrinsics, pose: &CameraPose) -> Result<Projection, GeomError> {
    let pc = pose.camera_from_world().apply_point(point);
    project_camera_frame(pc, cam)
}

pub fn project_camera_frame(pc: Vec3, cam: &CameraIntrinsics) -> Result<Projection, GeomError> {
    if !(pc.z > 0.0) {
        return Err(GeomError::BehindCamera { z: pc.z });
    }
    Ok(Projection {
        u: cam.fx * pc.x / pc.z + cam.cx,
        v: cam.fy * pc.y / pc.z + cam.cy,
        depth: pc.z,
    })
}

pub fn unproject(u: f64, v: f64, depth: f64, cam: &CameraIntrinsics, pose: &CameraPose) -> Result<Vec3, GeomError> {
    Ok(pose.world_from_camera.apply_point(unproject_camera_frame(u, v, depth, cam)?))
}

pub fn unproject_camera_frame(u: f64, v: f64, depth: f64, cam: &CameraIntrinsics) -> Result<Vec3, GeomError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeomError::InvalidDepth { depth });
    }
    Ok(Vec3::new((u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth))
}
