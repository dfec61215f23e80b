use crate::geometry::{unproject, Frame, UnitQuat};

use super::gaussian::{Gaussian2D, GaussianSet};
use super::SplatError;

pub const INIT_OPACITY: f64 = 0.5;
pub const INIT_SCALE_RANGE: (f64, f64) = (1e-4, 0.05);

/// Seed a splat set by back-projecting masked depth.
///
/// Every `stride`-th pixel (in both axes) that is masked and has valid depth
/// yields one splat at the unprojected point, colored by the pixel, with its
/// disk facing the camera and sized to the pixel footprint.
pub fn init_from_rgbd(frames: &[Frame], stride: usize) -> Result<GaussianSet, SplatError> {
    if frames.is_empty() {
        return Err(SplatError::NoFrames);
    }
    let stride = stride.max(1);
    let mut out = Vec::new();
    for f in frames {
        let cam = &f.intrinsics;
        let eye = f.pose.center();
        for j in (0..cam.height).step_by(stride) {
            for i in (0..cam.width).step_by(stride) {
                if !f.usable(i, j) {
                    continue;
                }
                let depth = f.image.depth_at(i, j);
                let p = unproject(i as f64 + 0.5, j as f64 + 0.5, depth, cam, &f.pose)?;
                let rgb = f.image.rgb_at(i, j).map(|c| c as f64 / 255.0);
                let s = (depth * stride as f64 / cam.fx).clamp(INIT_SCALE_RANGE.0, INIT_SCALE_RANGE.1);
                let rotation = UnitQuat::from_normal(eye - p);
                out.push(Gaussian2D::with_color(p, rotation, [s, s], INIT_OPACITY, rgb));
            }
        }
    }
    if out.is_empty() {
        return Err(SplatError::NoValidPixels);
    }
    Ok(GaussianSet::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, CameraPose, Mask, RgbdImage, Vec3};
    use crate::synthetic;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap()
    }

    #[test]
    fn empty_mask_has_no_pixels() {
        let img = RgbdImage::new(64, 64, vec![[9; 3]; 4096], vec![1.0; 4096]).unwrap();
        let f = Frame::new(img, Mask::empty(64, 64), cam(), CameraPose::default()).unwrap();
        assert!(matches!(init_from_rgbd(&[f], 1), Err(SplatError::NoValidPixels)));
        assert!(matches!(init_from_rgbd(&[], 1), Err(SplatError::NoFrames)));
    }

    #[test]
    fn single_center_pixel() {
        let mut img = RgbdImage::filled(64, 64, [0; 3]);
        img.set(32, 32, [255, 128, 0], 1.0);
        let f = Frame::new(img, Mask::full(64, 64), cam(), CameraPose::default()).unwrap();
        let set = init_from_rgbd(&[f], 1).unwrap();
        assert_eq!(set.len(), 1);
        let g = &set.gaussians[0];
        assert!((g.center - Vec3::new(0.005, 0.005, 1.0)).norm() < 1e-12);
        assert_eq!(g.opacity, INIT_OPACITY);
        assert!((g.scale[0] - 0.01).abs() < 1e-15);
        assert!((g.base_color()[1] - 128.0 / 255.0).abs() < 1e-12);
        // disk normal points back toward the camera at the origin
        assert!(g.normal().dot(-g.center.normalize()) > 0.999);
    }

    #[test]
    fn sphere_reinitialized_on_surface() {
        let center = Vec3::new(0.0, 0.0, 0.0);
        let radius = 0.1;
        let voxel = 0.005;
        let frames: Vec<Frame> = synthetic::orbit_poses(Vec3::ZERO, 0.6, 4, 0.4)
            .into_iter()
            .map(|pose| synthetic::sphere_frame(center, radius, [200, 50, 50], &cam(), &pose))
            .collect();
        let set = init_from_rgbd(&frames, 2).unwrap();
        assert!(set.len() > 100);
        let near = set.iter().filter(|g| ((g.center - center).norm() - radius).abs() < 2.0 * voxel).count();
        assert!(near as f64 >= 0.95 * set.len() as f64, "{near}/{}", set.len());
    }
}
